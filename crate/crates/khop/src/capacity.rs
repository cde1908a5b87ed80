//! Storage-capacity estimates and separation certificates.
//!
//! The central quantity is the kernel separation of the stored patterns. The
//! capacity estimate inverts an exponential relation via the principal
//! Lambert W branch; the sandwich bounds box in the best achievable
//! separation of a spherical code of a given size; and the well-separation
//! test certifies that every stored pattern clears the retrieval threshold.

use crate::error::{Error, Result};
use crate::kernel::FeatureMap;
use crate::patterns::PatternSet;
use serde::Serialize;

/// Principal branch of the Lambert W function, defined for `x >= -1/e`.
///
/// Solves `w * exp(w) = x` by Halley iteration from a regime-dependent
/// initial guess (branch-point series near `-1/e`, log asymptote for large
/// arguments). Round-trip error is below `1e-12 * max(1, |x|)` across the
/// domain.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let branch = -(-1.0f64).exp(); // -1/e
    if x < branch {
        return Err(Error::OutOfDomain {
            value: x,
            domain: "x >= -1/e",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    // Distance from the branch point, p^2 = 2 (e x + 1).
    let p_sq = 2.0 * (std::f64::consts::E * x + 1.0);
    let mut w = if p_sq <= 0.0 {
        return Ok(-1.0);
    } else if x < -0.25 {
        // Series around the branch point.
        let p = p_sq.sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x <= std::f64::consts::E {
        x / (1.0 + x)
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-14 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// `W0(exp(y))`, stable even when `exp(y)` overflows.
///
/// For large `y` the equation becomes `w + ln w = y`, solved by Newton from
/// `w = y - ln y`.
pub fn lambert_w0_exp(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    if y <= 700.0 {
        return lambert_w0(y.exp());
    }
    let mut w = y - y.ln();
    for _ in 0..50 {
        let f = w + w.ln() - y;
        let fp = 1.0 + 1.0 / w;
        let step = f / fp;
        w -= step;
        if step.abs() <= 1e-15 * w {
            break;
        }
    }
    Ok(w)
}

/// Natural log of the gamma function for positive arguments (Lanczos
/// approximation, relative error below `1e-12` on the range used here).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::OutOfDomain {
            value: x,
            domain: "x > 0",
        });
    }
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)] // digits as published in the coefficient table
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the Lanczos argument in its sweet spot.
        let pi = std::f64::consts::PI;
        return Ok((pi / (pi * x).sin()).ln() - log_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * base.ln() - base + sum.ln())
}

/// Capacity estimate together with the intermediate quantities it is built
/// from.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityBound {
    /// Estimated number of storable patterns, `sqrt(p) * C^((d_phi - 1)/4)`.
    pub bound: f64,
    /// Exponent term `a = (4/(d_phi - 1)) * (ln(2|sqrt(p) - 1| / r_phi) + 1)`.
    pub a: f64,
    /// Scale term `b = 4 * beta / (5 * (d_phi - 1))`.
    pub b: f64,
    /// `C = b / W0(exp(a + ln b))`.
    pub c: f64,
    /// Qualifications of the estimate (e.g. the asymptotic large-argument
    /// path for the Lambert evaluation).
    pub flags: Vec<String>,
}

/// Exponential storage-capacity estimate from the separation radius.
///
/// Grows monotonically in both `r_phi` and `beta`. Requires `d_phi >= 2`,
/// `beta > 0`, `p > 0` with `p != 1` (the probability knob; `p = 1` zeroes
/// the logarithm argument) and a positive radius. For `p < 1` the raw
/// argument `2(sqrt(p) - 1)/r_phi` is negative; the absolute value is used
/// and the result carries an `abs-log-argument` flag.
pub fn capacity_bound(d_phi: usize, beta: f64, p: f64, r_phi: f64) -> Result<CapacityBound> {
    if d_phi < 2 {
        return Err(Error::OutOfDomain {
            value: d_phi as f64,
            domain: "d_phi >= 2",
        });
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::OutOfDomain {
            value: beta,
            domain: "beta > 0",
        });
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::OutOfDomain {
            value: p,
            domain: "p > 0",
        });
    }
    if !(r_phi > 0.0 && r_phi.is_finite()) {
        return Err(Error::DegenerateRadius);
    }
    let dm1 = (d_phi - 1) as f64;
    let log_arg = 2.0 * (p.sqrt() - 1.0).abs() / r_phi;
    if log_arg <= 0.0 {
        return Err(Error::InvalidLogArgument { value: log_arg });
    }
    let a = 4.0 / dm1 * (log_arg.ln() + 1.0);
    let b = 4.0 * beta / (5.0 * dm1);

    let mut flags = Vec::new();
    if p < 1.0 {
        flags.push("abs-log-argument".to_string());
    }
    let y = a + b.ln();
    if y > 700.0 {
        flags.push("lambert-asymptotic".to_string());
    }
    let w = lambert_w0_exp(y)?;
    let c = b / w;
    let bound = p.sqrt() * c.powf(dm1 / 4.0);
    Ok(CapacityBound {
        bound,
        a,
        b,
        c,
        flags,
    })
}

/// Well-separation certificate of a stored pattern set.
#[derive(Debug, Clone, Serialize)]
pub struct WellSeparation {
    /// Per-pattern kernel separations.
    pub delta: Vec<f64>,
    /// Separation radius of the mapped patterns.
    pub r_phi: f64,
    /// The threshold every separation is compared against.
    pub threshold: f64,
    /// Whether the stricter (radius-augmented) threshold was used.
    pub strict: bool,
    pub per_pattern: Vec<bool>,
    /// True when every stored pattern clears the threshold, i.e. the set
    /// acts as a memory code at this inverse temperature.
    pub all: bool,
}

/// Check `delta_mu >= ln(2 (M - 1) / r_phi) / beta` for every pattern
/// (`strict` adds `2 r_phi` to the threshold).
///
/// Raising `beta` only lowers the threshold, so a set that is well separated
/// stays so at any higher inverse temperature.
pub fn well_separated(
    patterns: &PatternSet,
    phi: &FeatureMap,
    beta: f64,
    strict: bool,
) -> Result<WellSeparation> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::OutOfDomain {
            value: beta,
            domain: "beta > 0",
        });
    }
    let m = patterns.len();
    if m < 2 {
        return Err(Error::SinglePattern);
    }
    let stats = phi.separation_stats(patterns)?;
    if stats.r_phi <= 0.0 {
        return Err(Error::DegenerateRadius);
    }
    let mut threshold = (2.0 * (m as f64 - 1.0) / stats.r_phi).ln() / beta;
    if strict {
        threshold += 2.0 * stats.r_phi;
    }
    let per_pattern: Vec<bool> = stats.delta.iter().map(|&d| d >= threshold).collect();
    let all = per_pattern.iter().all(|&b| b);
    Ok(WellSeparation {
        delta: stats.delta,
        r_phi: stats.r_phi,
        threshold,
        strict,
        per_pattern,
        all,
    })
}

/// Lower and upper bounds on the best kernel separation achievable by `m`
/// unit vectors in `d_phi` dimensions:
///
/// ```text
/// lower = (1/2) * ( sqrt(pi)/m * Gamma((d+1)/2) / Gamma(d/2 + 1) )^(2/(d-1))
/// upper =   2   * ( 2 sqrt(pi)/m * Gamma((d+1)/2) / Gamma(d/2)   )^(1/(d-1))
/// ```
pub fn separation_sandwich(m: usize, d_phi: usize) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::SinglePoint);
    }
    if d_phi < 2 {
        return Err(Error::OutOfDomain {
            value: d_phi as f64,
            domain: "d_phi >= 2",
        });
    }
    let d = d_phi as f64;
    let m = m as f64;
    let half_ln_pi = 0.5 * std::f64::consts::PI.ln();
    let lg_top = log_gamma((d + 1.0) / 2.0)?;
    let lower_log = half_ln_pi - m.ln() + lg_top - log_gamma(d / 2.0 + 1.0)?;
    let upper_log = std::f64::consts::LN_2 + half_ln_pi - m.ln() + lg_top - log_gamma(d / 2.0)?;
    let lower = 0.5 * (2.0 / (d - 1.0) * lower_log).exp();
    let upper = 2.0 * (1.0 / (d - 1.0) * upper_log).exp();
    Ok((lower, upper))
}

/// Asymptotic estimates for the size of an optimal code with minimum angle
/// `theta`.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalCodeSize {
    /// `sqrt(2 pi d) * cos(theta) / sin(theta)^(d-1)`.
    pub lower: f64,
    /// `sin(theta)^(-d)`.
    pub upper: f64,
    /// Both formulas are large-dimension asymptotics; at small `d` they are
    /// rough estimates and may even cross.
    pub flags: Vec<String>,
}

/// Asymptotic bounds on how many points fit on the sphere in `d_phi`
/// dimensions at pairwise angle at least `theta in (0, pi/2)`.
pub fn optimal_code_size(theta: f64, d_phi: usize) -> Result<OptimalCodeSize> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::OutOfDomain {
            value: theta,
            domain: "0 < theta < pi/2",
        });
    }
    if d_phi < 2 {
        return Err(Error::OutOfDomain {
            value: d_phi as f64,
            domain: "d_phi >= 2",
        });
    }
    let d = d_phi as f64;
    let (sin, cos) = (theta.sin(), theta.cos());
    let lower = (2.0 * std::f64::consts::PI * d).sqrt() * cos / sin.powf(d - 1.0);
    let upper = (-d * sin.ln()).exp();
    Ok(OptimalCodeSize {
        lower,
        upper,
        flags: vec!["asymptotic-estimate".to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::generate_synthetic;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// Bisection oracle for the Lambert W root, independent of Halley.
    fn lambert_bisect(x: f64) -> f64 {
        let f = |w: f64| w * w.exp() - x;
        let (mut lo, mut hi) = (-1.0, 1.0 + x.abs().max(1.0).ln().max(0.0) + x.abs().sqrt());
        // Expand until the bracket straddles the root.
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_known_values() {
        assert_abs_diff_eq!(lambert_w0(0.0).unwrap(), 0.0, epsilon = 1e-15);
        // The omega constant.
        assert_abs_diff_eq!(
            lambert_w0(1.0).unwrap(),
            0.5671432904097838,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            lambert_w0(std::f64::consts::E).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let branch = -(-1.0f64).exp();
        assert_abs_diff_eq!(lambert_w0(branch).unwrap(), -1.0, epsilon = 1e-7);
        assert!(lambert_w0(branch - 1e-6).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_round_trip_across_regimes() {
        let branch = -(-1.0f64).exp();
        let mut xs = vec![branch + 1e-9, -0.2, -1e-6, 1e-9, 0.3, 1.0, 5.0, 100.0];
        for k in 0..40 {
            xs.push(10f64.powf(-8.0 + k as f64 * 0.35));
        }
        for x in xs {
            let w = lambert_w0(x).unwrap();
            let back = w * w.exp();
            assert!(
                (back - x).abs() <= 1e-12 * x.abs().max(1.0),
                "round trip failed at {x}: {back}"
            );
        }
    }

    #[test]
    fn lambert_matches_bisection_oracle() {
        for &x in &[-0.3, -0.05, 0.1, 0.9, 2.5, 17.0, 4096.0] {
            let w = lambert_w0(x).unwrap();
            let oracle = lambert_bisect(x);
            assert_abs_diff_eq!(w, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn lambert_exp_form_matches_direct_evaluation() {
        for &y in &[-3.0, 0.0, 2.0, 10.0, 300.0] {
            let a = lambert_w0_exp(y).unwrap();
            let b = lambert_w0(y.exp()).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10 * b.abs().max(1.0));
        }
        // Far beyond exp overflow: w + ln w = y must still hold.
        let w = lambert_w0_exp(800.0).unwrap();
        assert_abs_diff_eq!(w + w.ln(), 800.0, epsilon = 1e-9);
    }

    #[test]
    fn log_gamma_matches_halfinteger_recursion() {
        // Exact oracle: ln Gamma(n) = sum of logs from Gamma(1) = 1,
        // ln Gamma(n + 1/2) from Gamma(1/2) = sqrt(pi).
        let exact = |twice: usize| -> f64 {
            if twice.is_multiple_of(2) {
                let n = twice / 2;
                (1..n).map(|k| (k as f64).ln()).sum()
            } else {
                let mut acc = 0.5 * std::f64::consts::PI.ln();
                let mut z = 0.5;
                while z + 1.0 <= twice as f64 / 2.0 {
                    acc += z.ln();
                    z += 1.0;
                }
                acc
            }
        };
        for twice in 1..=400usize {
            let x = twice as f64 / 2.0;
            let got = log_gamma(x).unwrap();
            let want = exact(twice);
            let tol = 1e-12 * want.abs().max(1.0);
            assert!(
                (got - want).abs() <= tol,
                "log_gamma({x}) = {got}, oracle {want}"
            );
        }
        assert_abs_diff_eq!(log_gamma(10.0).unwrap(), 362880f64.ln(), epsilon = 1e-10);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
    }

    /// Fixed-point oracle for C = b / W0(exp(a + ln b)): iterate
    /// c -> b * exp(-a) * exp(b / c) ... rearranged from w = b/c and
    /// w e^w = e^a b. Seeded from the implementation-free bisection root.
    fn capacity_c_oracle(a: f64, b: f64) -> f64 {
        // Solve w + ln w = a + ln b by bisection, then c = b / w.
        let target = a + b.ln();
        let f = |w: f64| w + w.ln() - target;
        let (mut lo, mut hi) = (1e-300, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..500 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        b / (0.5 * (lo + hi))
    }

    #[test]
    fn capacity_matches_fixed_point_oracle() {
        for (d_phi, beta, p, r) in [
            (5usize, 4.0, 10.0, 0.5),
            (8, 1.0, 4.0, 0.1),
            (16, 0.5, 100.0, 0.9),
            (64, 1.0, 0.999, 0.5),
        ] {
            let out = capacity_bound(d_phi, beta, p, r).unwrap();
            let c = capacity_c_oracle(out.a, out.b);
            assert!(
                (out.c - c).abs() <= 1e-9 * c.abs().max(1.0),
                "C mismatch: {} vs oracle {c}",
                out.c
            );
            let bound = p.sqrt() * c.powf((d_phi as f64 - 1.0) / 4.0);
            assert!((out.bound - bound).abs() <= 1e-9 * bound.max(1.0));
        }
    }

    #[test]
    fn sub_unit_probability_is_flagged_and_still_monotone() {
        let out = capacity_bound(64, 1.0, 0.999, 0.5).unwrap();
        assert!(out.flags.iter().any(|f| f == "abs-log-argument"));
        assert!(out.bound.is_finite() && out.bound > 0.0);

        let tight = capacity_bound(12, 2.0, 0.5, 0.2).unwrap();
        assert!(tight.flags.iter().any(|f| f == "abs-log-argument"));
        let wide = capacity_bound(12, 2.0, 0.5, 0.4).unwrap();
        let hot = capacity_bound(12, 4.0, 0.5, 0.2).unwrap();
        assert!(wide.bound >= tight.bound);
        assert!(hot.bound >= tight.bound);

        assert!(capacity_bound(12, 2.0, 1.0, 0.2).is_err());
        assert!(capacity_bound(12, 2.0, 0.5, 0.2).unwrap().bound.is_finite());
        assert!(matches!(
            capacity_bound(12, 2.0, 0.0, 0.2),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn capacity_rejects_degenerate_inputs() {
        assert!(matches!(
            capacity_bound(1, 1.0, 4.0, 0.5),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            capacity_bound(5, 0.0, 4.0, 0.5),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            capacity_bound(5, 1.0, 4.0, 0.0),
            Err(Error::DegenerateRadius)
        ));
        assert!(matches!(
            capacity_bound(5, 1.0, 1.0, 0.5),
            Err(Error::InvalidLogArgument { .. })
        ));
    }

    #[test]
    fn sandwich_in_three_dimensions_has_closed_forms() {
        // d = 3 collapses to lower = 2/(3m), upper = 2 sqrt(4/m).
        for m in [4usize, 6, 12] {
            let (lo, hi) = separation_sandwich(m, 3).unwrap();
            assert_abs_diff_eq!(lo, 2.0 / (3.0 * m as f64), epsilon = 1e-12);
            assert_abs_diff_eq!(hi, 2.0 * (4.0 / m as f64).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn optimal_code_size_known_value() {
        let out = optimal_code_size(std::f64::consts::FRAC_PI_3, 2).unwrap();
        // sqrt(4 pi) * cos(60) / sin(60) simplifies to 2 sqrt(pi / 3).
        let want = 2.0 * (std::f64::consts::PI / 3.0).sqrt();
        assert_abs_diff_eq!(out.lower, want, epsilon = 1e-12);
        assert_abs_diff_eq!(out.upper, 4.0 / 3.0, epsilon = 1e-12);
        assert!(out.flags.iter().any(|f| f.contains("asymptotic")));
        assert!(optimal_code_size(2.0, 2).is_err());
    }

    #[test]
    fn well_separation_known_instance() {
        // Antipodal unit patterns: delta = 2, r_phi = 1, threshold =
        // ln(2)/beta. beta = 1: 2 >= 0.693 (separated); beta = 0.1: 2 < 6.93.
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let set = PatternSet::from_columns(xi).unwrap();
        let phi = FeatureMap::new(Array2::eye(2), true).unwrap();
        let yes = well_separated(&set, &phi, 1.0, false).unwrap();
        assert!(yes.all);
        assert_abs_diff_eq!(yes.threshold, std::f64::consts::LN_2, epsilon = 1e-12);
        let no = well_separated(&set, &phi, 0.1, false).unwrap();
        assert!(!no.all);
        // The strict variant adds 2 r_phi = 2: threshold 2.693 > delta.
        let strict = well_separated(&set, &phi, 1.0, true).unwrap();
        assert!(!strict.all);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn capacity_is_monotone_in_radius_and_beta(
            d_phi in 2usize..30,
            beta in 0.05f64..20.0,
            p in 1.5f64..200.0,
            r in 1e-3f64..0.999,
        ) {
            let base = capacity_bound(d_phi, beta, p, r).unwrap().bound;
            let wider = capacity_bound(d_phi, beta, p, (r * 1.3).min(1.0)).unwrap().bound;
            let hotter = capacity_bound(d_phi, beta * 1.3, p, r).unwrap().bound;
            prop_assert!(wider >= base - 1e-9 * base.abs().max(1.0));
            prop_assert!(hotter >= base - 1e-9 * base.abs().max(1.0));
        }

        #[test]
        fn well_separation_is_monotone_in_beta(seed in 0u64..200, beta in 0.1f64..5.0) {
            let set = generate_synthetic(4, 6, seed).unwrap();
            let phi = FeatureMap::random(6, 5, seed + 7).unwrap();
            let a = well_separated(&set, &phi, beta, false).unwrap();
            let b = well_separated(&set, &phi, beta * 2.0, false).unwrap();
            // Doubling beta lowers the threshold, so certificates never
            // flip from true to false.
            for (x, y) in a.per_pattern.iter().zip(&b.per_pattern) {
                prop_assert!(!x || *y);
            }
        }

        #[test]
        fn lambert_round_trip_randomized(u in -8.0f64..6.0) {
            let x = 10f64.powf(u) - (-1.0f64).exp();
            let w = lambert_w0(x).unwrap();
            let back = w * w.exp();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1.0));
        }
    }
}
