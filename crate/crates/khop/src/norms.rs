//! Normalization maps from score vectors to the probability simplex.
//!
//! All three maps are translation invariant, preserve the ordering of their
//! inputs, and return vectors with non-negative entries summing to one. They
//! differ in how much probability mass they are willing to spread: softmax is
//! dense everywhere, 1.5-entmax sparsifies once scores separate by 2, and
//! sparsemax sparsifies once they separate by 1.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which normalization map the retrieval dynamics use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Softmax,
    Sparsemax,
    Entmax15,
}

impl NormKind {
    /// True for maps whose output support is exact (entries are either zero
    /// or genuinely positive), so support can be counted without a threshold.
    pub fn is_sparse(self) -> bool {
        !matches!(self, NormKind::Softmax)
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(NormKind::Softmax),
            "sparsemax" => Ok(NormKind::Sparsemax),
            "entmax15" | "entmax" | "entmax1.5" => Ok(NormKind::Entmax15),
            other => Err(Error::Config(format!("unknown normalization map: {other}"))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NormKind::Softmax => "softmax",
            NormKind::Sparsemax => "sparsemax",
            NormKind::Entmax15 => "entmax15",
        };
        f.write_str(s)
    }
}

fn check_input(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::EmptySelection);
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Apply the chosen normalization map to a score vector.
pub fn apply(kind: NormKind, z: &[f64]) -> Result<Vec<f64>> {
    match kind {
        NormKind::Softmax => softmax(z),
        NormKind::Sparsemax => sparsemax(z),
        NormKind::Entmax15 => entmax15(z),
    }
}

/// Numerically stable softmax with max subtraction.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    check_input(z)?;
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Euclidean projection of the score vector onto the probability simplex.
///
/// Uses the sort-and-threshold characterization: with scores sorted in
/// decreasing order, the support size is the largest `k` such that
/// `1 + k * z_(k) > sum_{j <= k} z_(j)`, and the threshold is
/// `tau = (sum over the support - 1) / k`. Entries at the threshold are
/// resolved by the sort, which breaks ties by original index, so equal scores
/// always receive equal weights.
pub fn sparsemax(z: &[f64]) -> Result<Vec<f64>> {
    check_input(z)?;
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap().then(a.cmp(&b)));

    let mut cumsum = 0.0;
    let mut k = 0usize;
    let mut support_sum = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let zi = z[idx];
        cumsum += zi;
        let kk = rank + 1;
        if 1.0 + kk as f64 * zi > cumsum {
            k = kk;
            support_sum = cumsum;
        }
    }
    // k >= 1 always: for the largest element 1 + z_(1) > z_(1).
    let tau = (support_sum - 1.0) / k as f64;
    Ok(z.iter().map(|&v| (v - tau).max(0.0)).collect())
}

/// Maximum number of bisection iterations for the 1.5-entmax threshold.
pub const ENTMAX_MAX_ITERS: usize = 200;

/// 1.5-entmax: `p_i = [max(0, z_i / 2 - tau)]^2` with the threshold `tau`
/// chosen so the entries sum to one.
///
/// The threshold is bracketed by `[min(z)/2 - 1, max(z)/2]` and located by
/// bisection; the residual `|sum(p) - 1|` must fall below `1e-10` within
/// [`ENTMAX_MAX_ITERS`] iterations, otherwise [`Error::BisectionNoConverge`]
/// is returned. The result is renormalized so it sums to one exactly.
pub fn entmax15(z: &[f64]) -> Result<Vec<f64>> {
    check_input(z)?;
    let half: Vec<f64> = z.iter().map(|&v| v / 2.0).collect();
    let lo0 = half.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = half.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mass = |tau: f64| -> f64 {
        half.iter()
            .map(|&h| {
                let t = (h - tau).max(0.0);
                t * t
            })
            .sum::<f64>()
    };

    // mass is continuous and non-increasing in tau, with mass(lo0) >= 1 and
    // mass(hi0) = 0, so the root is inside the bracket.
    let (mut lo, mut hi) = (lo0, hi0);
    let mut tau = 0.5 * (lo + hi);
    let mut resid = f64::INFINITY;
    for _ in 0..ENTMAX_MAX_ITERS {
        tau = 0.5 * (lo + hi);
        let m = mass(tau);
        resid = m - 1.0;
        if resid.abs() <= 1e-12 {
            break;
        }
        if m > 1.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    if resid.abs() > 1e-10 {
        return Err(Error::BisectionNoConverge {
            max_iters: ENTMAX_MAX_ITERS,
        });
    }

    let mut out: Vec<f64> = half
        .iter()
        .map(|&h| {
            let t = (h - tau).max(0.0);
            t * t
        })
        .collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}
