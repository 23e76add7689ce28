//! How many random binary hypervectors fit in `D` dimensions.
//!
//! Two random `D`-bit vectors have a Hamming distance distributed
//! approximately `Normal(D/2, (√D/2)²)`. A pair counts as pseudo-orthogonal
//! when the normalized distance lies in `0.5 ± 0.05`, i.e. within
//! `z = ±0.1√D` standard deviations, with probability `P = Φ(z) − Φ(−z)`.
//! The capacity `N` is the number of vectors for which the expected count of
//! non-orthogonal pairs is exactly one:
//!
//! ```text
//! N(N − 1)/2 · (1 − P) = 1   ⇒   N = (1 + √(1 + 8/(1 − P))) / 2
//! ```
//!
//! `1 − P` underflows long before the dimensions of interest (D ≈ 10⁵ gives
//! z ≈ 36), so the tail is carried in log space.

use std::f64::consts::{LN_2, PI};

use libm::{erf, erfc};

/// Half-width of the pseudo-orthogonality band in normalized Hamming distance.
pub const ORTHOGONALITY_TOLERANCE: f64 = 0.05;

/// Beyond this z the two-sided tail uses the asymptotic expansion.
const ASYMPTOTIC_Z: f64 = 8.0;

/// z-score of the band edge: `0.05·D / (√D/2) = 0.1·√D`.
pub fn band_z_score(dims: usize) -> f64 {
    2.0 * ORTHOGONALITY_TOLERANCE * (dims as f64).sqrt()
}

/// `P = Φ(0.1√D) − Φ(−0.1√D)`.
pub fn orthogonality_probability(dims: usize) -> f64 {
    erf(band_z_score(dims) / std::f64::consts::SQRT_2)
}

/// `ln(2·Q(z))`, the log of the two-sided standard normal tail beyond `|z|`.
pub fn ln_two_sided_tail(z: f64) -> f64 {
    let z = z.abs();
    if z <= ASYMPTOTIC_Z {
        return erfc(z / std::f64::consts::SQRT_2).ln();
    }
    // Q(z) = φ(z)/z · (1 − 1/z² + 3/z⁴ − 15/z⁶ + 105/z⁸ − …)
    let z2 = z * z;
    let series =
        1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
    LN_2 - 0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + series.ln()
}

/// `ln(1 − P)` for dimension `dims`.
pub fn ln_non_orthogonal_probability(dims: usize) -> f64 {
    ln_two_sided_tail(band_z_score(dims))
}

/// `log10` of the (unfloored) positive root `N`.
pub fn log10_capacity(dims: usize) -> f64 {
    let ln_a = ln_non_orthogonal_probability(dims);
    let ln_ratio = 8f64.ln() - ln_a; // ln(8 / (1 − P))
    let ln_n = if ln_ratio < 600.0 {
        ((1.0 + (1.0 + ln_ratio.exp()).sqrt()) / 2.0).ln()
    } else {
        // √(1 + r) ≈ √r with r > e^600
        0.5 * ln_ratio - LN_2
    };
    ln_n / std::f64::consts::LN_10
}

/// Number of classes representable in `dims` dimensions: the floor of the
/// positive quadratic root. Returns `f64::INFINITY` once the count exceeds
/// the `f64` range (D beyond ~280 000); use [`log10_capacity`] there.
pub fn capacity(dims: usize) -> f64 {
    let ln_a = ln_non_orthogonal_probability(dims);
    let ln_ratio = 8f64.ln() - ln_a;
    if ln_ratio < 600.0 {
        ((1.0 + (1.0 + ln_ratio.exp()).sqrt()) / 2.0).floor()
    } else {
        (0.5 * ln_ratio - LN_2).exp().floor()
    }
}

/// Largest dimension scanned by [`crossover_dimension`].
pub const CROSSOVER_SCAN_LIMIT: usize = 1_000_000;

/// The dimension where hypervector capacity overtakes one-hot encoding.
///
/// For a handful of tiny `D` (1 and 2) the floored capacity of 2 trivially
/// exceeds `D`; the crossover reported here is the first upward crossing
/// after capacity has dropped below the one-hot line.
pub fn crossover_dimension() -> usize {
    let mut d = 1;
    while capacity(d) >= d as f64 {
        d += 1;
    }
    while capacity(d) < d as f64 {
        d += 1;
        assert!(
            d < CROSSOVER_SCAN_LIMIT,
            "no crossover below {CROSSOVER_SCAN_LIMIT}"
        );
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_increases_with_dims() {
        let mut prev = 0.0;
        for d in [1, 2, 10, 100, 500, 1000, 2000] {
            let p = orthogonality_probability(d);
            assert!(p > prev && p < 1.0, "P({d}) = {p}");
            prev = p;
        }
        assert!(orthogonality_probability(1) < 0.1);
    }

    #[test]
    fn tail_branches_agree_at_switch() {
        let exact = erfc(ASYMPTOTIC_Z / std::f64::consts::SQRT_2).ln();
        let asym = ln_two_sided_tail(ASYMPTOTIC_Z + 1e-12);
        assert!((exact - asym).abs() < 1e-5, "{exact} vs {asym}");
    }

    #[test]
    fn capacity_is_finite_and_monotone_through_the_asymptotic_regime() {
        let mut prev = 0.0;
        for d in (1000..200_000).step_by(997) {
            let n = log10_capacity(d);
            assert!(n.is_finite() && n >= prev);
            prev = n;
        }
    }

    #[test]
    fn huge_dims_overflow_to_infinity_but_log_stays_finite() {
        assert!(capacity(1_000_000).is_infinite());
        assert!(log10_capacity(1_000_000).is_finite());
    }
}
