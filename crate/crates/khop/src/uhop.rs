//! Separation learning for the feature map.
//!
//! Training minimizes the log-sum-exp separation loss
//!
//! ```text
//! L(W) = (1/M) * sum_mu log sum_nu exp(<phi(xi_mu), phi(xi_nu)> / tau)
//! ```
//!
//! over maps with unit Frobenius norm, by projected gradient descent on the
//! Frobenius sphere. Driving L down pushes the worst pairwise feature
//! similarity (the hardmax loss) down, which in turn widens the kernel
//! separation that retrieval quality and capacity bounds depend on.

use crate::error::{Error, Result};
use crate::hopfield::logsumexp;
use crate::kernel::FeatureMap;
use crate::patterns::PatternSet;
use ndarray::Array2;

fn check_tau(tau: f64) -> Result<()> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::OutOfDomain {
            value: tau,
            domain: "tau > 0",
        });
    }
    Ok(())
}

/// Pairwise feature similarities `s[mu][nu] = <phi_mu, phi_nu>` plus the raw
/// (pre-normalization) feature matrix and column norms.
struct FeatureState {
    /// `d_phi x m` raw features `W^T Xi`.
    raw: Array2<f64>,
    /// Column norms of `raw` (all ones when normalization is off).
    norms: Vec<f64>,
    /// `d_phi x m` effective features (normalized when the map says so).
    feats: Array2<f64>,
    /// `m x m` similarity matrix of the effective features.
    sim: Array2<f64>,
}

fn feature_state(patterns: &PatternSet, phi: &FeatureMap) -> Result<FeatureState> {
    if patterns.dim() != phi.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim_in(),
            got: patterns.dim(),
        });
    }
    let raw = phi.weights().t().dot(patterns.matrix());
    let m = raw.ncols();
    let mut norms = vec![1.0; m];
    let feats = if phi.normalizes() {
        let mut f = raw.clone();
        for (mu, norm) in norms.iter_mut().enumerate() {
            let n = f.column(mu).dot(&f.column(mu)).sqrt();
            if n == 0.0 {
                return Err(Error::ZeroVector { index: mu });
            }
            *norm = n;
            f.column_mut(mu).mapv_inplace(|v| v / n);
        }
        f
    } else {
        raw.clone()
    };
    let sim = feats.t().dot(&feats);
    Ok(FeatureState {
        raw,
        norms,
        feats,
        sim,
    })
}

/// Mean log-sum-exp similarity loss at temperature `tau` (self terms
/// included).
pub fn separation_loss(patterns: &PatternSet, phi: &FeatureMap, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let state = feature_state(patterns, phi)?;
    let m = patterns.len();
    let mut total = 0.0;
    for mu in 0..m {
        let row: Vec<f64> = (0..m).map(|nu| state.sim[(mu, nu)] / tau).collect();
        total += logsumexp(&row);
    }
    Ok(total / m as f64)
}

/// Worst pairwise feature similarity, `max_{mu != nu} <phi_mu, phi_nu>`.
///
/// This is the zero-temperature limit of the separation objective: under
/// unit-norm features, minimizing it maximizes the kernel separation.
pub fn hardmax_loss(patterns: &PatternSet, phi: &FeatureMap) -> Result<f64> {
    let m = patterns.len();
    if m < 2 {
        return Err(Error::SinglePattern);
    }
    let state = feature_state(patterns, phi)?;
    let mut worst = f64::NEG_INFINITY;
    for mu in 0..m {
        for nu in (mu + 1)..m {
            worst = worst.max(state.sim[(mu, nu)]);
        }
    }
    Ok(worst)
}

/// Recentered log-sum-exp envelope of the hardmax loss:
///
/// ```text
/// L0 = tau * log( sum_mu log(1 + sum_{nu != mu} exp((s_munu - s_mumu)/tau)) )
/// ```
///
/// For any instance with at least two patterns this satisfies the sandwich
///
/// ```text
/// hardmax - s_self - tau*log(M)  <=  L0  <=  tau*log(M(M-1)) + hardmax - s_self
/// ```
///
/// (with `s_self = 1` for unit-norm features), so `L0` tracks the hardmax
/// loss to within `2 * tau * log(M)`.
pub fn helper_loss_l0(patterns: &PatternSet, phi: &FeatureMap, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let m = patterns.len();
    if m < 2 {
        return Err(Error::SinglePattern);
    }
    let state = feature_state(patterns, phi)?;
    // Work in log space throughout: the inner sums shrink like
    // exp((hardmax - 1)/tau), far below the resolution of `1.0 + x` long
    // before they underflow, so `log(log1p(...))` is pieced together from
    // the log of the sum instead of the sum itself.
    let mut log_terms = Vec::with_capacity(m);
    for mu in 0..m {
        let a: Vec<f64> = (0..m)
            .filter(|&nu| nu != mu)
            .map(|nu| (state.sim[(mu, nu)] - state.sim[(mu, mu)]) / tau)
            .collect();
        let lx = logsumexp(&a);
        let lg = if lx < -37.0 {
            // log1p(x) == x to full precision.
            lx
        } else if lx > 37.0 {
            // log1p(x) == log(x) == lx to full precision.
            lx.ln()
        } else {
            lx.exp().ln_1p().ln()
        };
        log_terms.push(lg);
    }
    Ok(tau * logsumexp(&log_terms))
}

/// The separation loss with each row's constant self-similarity removed:
/// `(1/M) sum_mu log(1 + sum_{nu != mu} exp((s_munu - s_mumu)/tau))`.
///
/// For a normalizing map this equals `separation_loss - 1/tau` exactly, but
/// stays meaningful at temperatures where the full loss saturates: at
/// `tau = 0.05` the full loss is pinned near `20.0` and successive
/// iterations differ by less than one ulp, while this value keeps full
/// relative precision all the way down. The training loop uses it for
/// line-search comparisons whenever the map normalizes.
pub fn centered_separation_loss(patterns: &PatternSet, phi: &FeatureMap, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let m = patterns.len();
    if m < 2 {
        return Err(Error::SinglePattern);
    }
    let state = feature_state(patterns, phi)?;
    let mut total = 0.0;
    for mu in 0..m {
        let a: Vec<f64> = (0..m)
            .filter(|&nu| nu != mu)
            .map(|nu| (state.sim[(mu, nu)] - state.sim[(mu, mu)]) / tau)
            .collect();
        let lx = logsumexp(&a);
        total += if lx > 33.0 {
            // log1p(e^lx) = lx + log1p(e^-lx).
            lx + (-lx).exp().ln_1p()
        } else {
            lx.exp().ln_1p()
        };
    }
    Ok(total / m as f64)
}

/// Analytic gradient of [`separation_loss`] with respect to the map weights.
///
/// Handles both normalization modes; the normalized case includes the
/// Jacobian of the per-feature projection onto the unit sphere.
pub fn loss_gradient(patterns: &PatternSet, phi: &FeatureMap, tau: f64) -> Result<Array2<f64>> {
    check_tau(tau)?;
    let state = feature_state(patterns, phi)?;
    let m = patterns.len();
    let xi = patterns.matrix();

    // Row-wise softmax of sim / tau: p[mu][nu] = d(loss_mu)/d(sim[mu][nu]).
    let mut p = Array2::zeros((m, m));
    for mu in 0..m {
        let row: Vec<f64> = (0..m).map(|nu| state.sim[(mu, nu)] / tau).collect();
        let lse = logsumexp(&row);
        for nu in 0..m {
            p[(mu, nu)] = (row[nu] - lse).exp();
        }
    }

    let scale = 1.0 / (m as f64 * tau);
    if !phi.normalizes() {
        // d sim[mu][nu] / dW = xi_mu f_nu^T + xi_nu f_mu^T, self terms
        // included, which collapses to Xi (P + P^T) F^T.
        let q = &p + &p.t();
        let grad = xi.dot(&q).dot(&state.raw.t());
        return Ok(grad.mapv(|v| v * scale));
    }

    // Normalized case: u_mu = f_mu / r_mu. Differentiating through the
    // normalization leaves, for each pattern mu,
    //   v_mu = sum_{nu != mu} (p[mu][nu] + p[nu][mu]) * (u_nu - sim[mu][nu] * u_mu)
    // and grad = (1/(M tau)) * sum_mu (xi_mu / r_mu) v_mu^T.
    let mut q = &p + &p.t();
    // The diagonal contributes nothing (self-similarity is constant on the
    // feature sphere). Dropping it up front matters numerically: at small
    // tau the diagonal of q dominates and its exact cancellation against
    // the c_mu u_mu term would drown the surviving cross terms in rounding
    // noise.
    for mu in 0..m {
        q[(mu, mu)] = 0.0;
    }
    // V = U Q with columns v_mu = sum_nu q[mu][nu] u_nu ... (Q symmetric).
    let mut v = state.feats.dot(&q);
    for mu in 0..m {
        let c: f64 = (0..m).map(|nu| q[(mu, nu)] * state.sim[(mu, nu)]).sum();
        let u_mu = state.feats.column(mu).to_owned();
        v.column_mut(mu).zip_mut_with(&u_mu, |vv, uu| *vv -= c * uu);
    }
    // Scale column mu by 1 / r_mu, then contract with the patterns.
    for mu in 0..m {
        let inv = 1.0 / state.norms[mu];
        v.column_mut(mu).mapv_inplace(|x| x * inv);
    }
    let grad = xi.dot(&v.t());
    Ok(grad.mapv(|x| x * scale))
}

/// One projected gradient step on the Frobenius sphere:
/// `W' = (W - gamma * G) / ||W - gamma * G||_F`.
pub fn pgd_step(w: &Array2<f64>, grad: &Array2<f64>, gamma: f64) -> Result<Array2<f64>> {
    if w.dim() != grad.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: grad.len(),
        });
    }
    let moved = w - &grad.mapv(|g| g * gamma);
    let norm = moved.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(moved.mapv(|v| v / norm))
}

/// Step-size policy for the training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzMode {
    /// Armijo backtracking line search (monotone by construction). The
    /// search warm-starts from twice the previously accepted step.
    Backtracking,
    /// A known gradient-Lipschitz constant `G`; the step is `min(lr, 1/G)`.
    Provided(f64),
}

/// Settings for [`uhop_plus`].
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Number of projected gradient iterations.
    pub iters: usize,
    /// Base learning rate (initial step for backtracking, cap for the
    /// provided-constant mode).
    pub lr: f64,
    /// Loss temperature.
    pub tau: f64,
    pub lipschitz: LipschitzMode,
    /// Seed used to draw the initial map in [`train`]; recorded alongside
    /// results so runs can be reproduced.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 20,
            lr: 0.1,
            tau: 1.0,
            lipschitz: LipschitzMode::Backtracking,
            seed: 0,
        }
    }
}

/// One row of the training log, recorded after each iteration.
#[derive(Debug, Clone, Copy)]
pub struct TrainLogRow {
    pub iter: usize,
    pub loss: f64,
    pub hardmax: f64,
    pub delta_min: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub phi: FeatureMap,
    /// Loss and separation after each iteration (`cfg.iters` rows).
    pub log: Vec<TrainLogRow>,
    /// Loss of the initial map, for before/after comparisons.
    pub initial_loss: f64,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Loss value used for line-search comparisons: centered when the map
/// normalizes (same ordering as the full loss, but keeps resolving
/// differences once the full loss saturates near `1/tau`), plain otherwise.
fn tracked_loss(patterns: &PatternSet, phi: &FeatureMap, tau: f64) -> Result<f64> {
    if phi.normalizes() {
        centered_separation_loss(patterns, phi, tau)
    } else {
        separation_loss(patterns, phi, tau)
    }
}

/// Projected gradient descent on the separation loss, starting from `w0`.
///
/// With [`LipschitzMode::Backtracking`] the recorded loss is non-increasing
/// across iterations: a step is only taken when it passes the Armijo test
/// (or, as a last resort, does not increase the loss).
pub fn uhop_plus(patterns: &PatternSet, w0: &FeatureMap, cfg: &TrainConfig) -> Result<TrainResult> {
    check_tau(cfg.tau)?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::OutOfDomain {
            value: cfg.lr,
            domain: "lr > 0",
        });
    }
    if patterns.len() < 2 {
        return Err(Error::SinglePattern);
    }
    let mut phi = w0.clone();
    let offset = if w0.normalizes() { 1.0 / cfg.tau } else { 0.0 };
    let mut loss = tracked_loss(patterns, &phi, cfg.tau)?;
    let initial_loss = loss + offset;
    let mut log = Vec::with_capacity(cfg.iters);
    let mut warm_step = cfg.lr;

    for iter in 0..cfg.iters {
        let grad = loss_gradient(patterns, &phi, cfg.tau)?;
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();

        if grad_sq > 0.0 {
            match cfg.lipschitz {
                LipschitzMode::Provided(g) => {
                    if !(g > 0.0 && g.is_finite()) {
                        return Err(Error::OutOfDomain {
                            value: g,
                            domain: "lipschitz constant > 0",
                        });
                    }
                    let gamma = cfg.lr.min(1.0 / g);
                    let w_next = pgd_step(phi.weights(), &grad, gamma)?;
                    phi = FeatureMap::new(w_next, phi.normalizes())?;
                    loss = tracked_loss(patterns, &phi, cfg.tau)?;
                }
                LipschitzMode::Backtracking => {
                    let mut gamma = 2.0 * warm_step;
                    let mut accepted = None;
                    for _ in 0..MAX_HALVINGS {
                        let w_cand = pgd_step(phi.weights(), &grad, gamma)?;
                        let cand = FeatureMap::new(w_cand, phi.normalizes())?;
                        let l_cand = tracked_loss(patterns, &cand, cfg.tau)?;
                        if l_cand <= loss - ARMIJO_C * gamma * grad_sq {
                            accepted = Some((cand, l_cand, gamma));
                            break;
                        }
                        gamma *= 0.5;
                    }
                    match accepted {
                        Some((cand, l_cand, used)) => {
                            phi = cand;
                            loss = l_cand;
                            warm_step = used;
                        }
                        None => {
                            // Fully flat direction; accept any non-increase,
                            // otherwise stay put for this iteration.
                            let w_cand = pgd_step(phi.weights(), &grad, gamma)?;
                            let cand = FeatureMap::new(w_cand, phi.normalizes())?;
                            let l_cand = tracked_loss(patterns, &cand, cfg.tau)?;
                            if l_cand <= loss {
                                phi = cand;
                                loss = l_cand;
                            }
                            warm_step = gamma;
                        }
                    }
                }
            }
        }

        let stats = phi.separation_stats(patterns)?;
        log.push(TrainLogRow {
            iter,
            loss: loss + offset,
            hardmax: hardmax_loss(patterns, &phi)?,
            delta_min: stats.delta_min,
        });
    }

    Ok(TrainResult {
        phi,
        log,
        initial_loss,
    })
}

/// Draw a seeded random initial map and train it; see [`uhop_plus`].
pub fn train(patterns: &PatternSet, d_phi: usize, cfg: &TrainConfig) -> Result<TrainResult> {
    let w0 = FeatureMap::random(patterns.dim(), d_phi, cfg.seed)?;
    uhop_plus(patterns, &w0, cfg)
}
