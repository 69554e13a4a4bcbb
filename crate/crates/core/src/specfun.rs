//! Scalar special functions used by the self-similar profiles.
//!
//! Only the parameter envelope the profiles need is supported: real
//! arguments, moderate `|z|`, and `b` away from the non-positive integers.
//! Kummer's function is summed as an ascending series on the side of the
//! real axis where every term is non-negative.

use crate::error::{Error, Result};

/// Largest `|z|` accepted by [`kummer_m`]. The profiles only need
/// `|z| <= alpha^2 / 4`; beyond this the ascending series is no longer the
/// right tool and we refuse instead of extrapolating.
pub const MAX_ABS_Z: f64 = 100.0;

/// Stopping rule for series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Accuracy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !rel_tol.is_finite() || rel_tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {rel_tol}"
            )));
        }
        if max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be at least 1".into()));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_terms: 500,
        }
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Kummer's confluent hypergeometric function `M(a, b, z)`.
///
/// For `z < 0` the value is obtained from `M(a, b, z) = e^z M(b - a, b, -z)`,
/// so the summed series has non-negative terms whenever `b - a >= 0`.
pub fn kummer_m(a: f64, b: f64, z: f64, acc: Accuracy) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite argument M({a}, {b}, {z})"
        )));
    }
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "b = {b} is a non-positive integer"
        )));
    }
    if z.abs() > MAX_ABS_Z {
        return Err(Error::InvalidParameter(format!(
            "|z| = {} exceeds the supported bound {MAX_ABS_Z}",
            z.abs()
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z < 0.0 {
        Ok(z.exp() * ascending_series(b - a, b, -z, acc)?)
    } else {
        ascending_series(a, b, z, acc)
    }
}

fn ascending_series(a: f64, b: f64, z: f64, acc: Accuracy) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..acc.max_terms {
        let kf = k as f64;
        term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Once the term ratio drops below one for good, the remaining tail
        // is bounded by a geometric series.
        let next_ratio = ((a + kf + 1.0) * z / ((b + kf + 1.0) * (kf + 2.0))).abs();
        if next_ratio < 1.0 && kf + 1.0 > z {
            let tail = term.abs() * next_ratio / (1.0 - next_ratio);
            if tail <= acc.rel_tol * sum.abs() {
                return Ok(sum);
            }
        }
    }
    Err(Error::NonConvergence {
        terms: acc.max_terms,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// erf through the everywhere-positive series
    /// `erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (1*3*...*(2n+1))`.
    fn erf_oracle(x: f64) -> f64 {
        let sign = x.signum();
        let x = x.abs();
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-18 * sum {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        sign * 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
    }

    /// Plain ascending series of M(a, b, z) without any transformation.
    fn kummer_direct(a: f64, b: f64, z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..1000 {
            let kf = k as f64;
            term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
            sum += term;
            if term.abs() < 1e-19 * sum.abs() && kf > z.abs() {
                break;
            }
        }
        sum
    }

    #[test]
    fn erfc_at_zero_is_one() {
        assert_eq!(erfc(0.0), 1.0);
    }

    #[test]
    fn erfc_matches_reference_values() {
        // 40-digit reference values.
        let cases = [
            (0.5, 0.479_500_122_186_953_462_317_253_346_108_035_471_2),
            (1.3, 0.065_992_055_059_347_563_396_106_672_496_282_883),
            (-1.3, 1.934_007_944_940_652_436_603_893_327_503_711_017),
        ];
        for (x, want) in cases {
            assert!((erfc(x) - want).abs() <= 1e-15 * want, "erfc({x})");
        }
        assert!((erfc(0.5) - (1.0 - erf_oracle(0.5))).abs() < 1e-14);
    }

    #[test]
    fn erfc_reflection() {
        let x = 1.3;
        assert!((erfc(-x) - (2.0 - erfc(x))).abs() < 1e-15);
    }

    #[test]
    fn erfc_agrees_with_series_oracle() {
        for i in 0..=120 {
            let x = -3.0 + 0.05 * i as f64;
            let want = 1.0 - erf_oracle(x);
            assert!((erfc(x) - want).abs() < 2e-15, "x = {x}");
        }
    }

    #[test]
    fn erfc_partition_and_monotonicity() {
        for i in 0..1000 {
            let x = -6.0 + 12.0 * i as f64 / 999.0;
            assert!((erfc(x) + erfc(-x) - 2.0).abs() <= 1e-14);
            assert!((erf(x) + erfc(x) - 1.0).abs() <= 1e-15);
        }
        // Below about -4 erfc(x) rounds to 2 and cannot decrease visibly.
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let x = -4.0 + 10.0 * i as f64 / 999.0;
            let v = erfc(x);
            assert!(v > 0.0 && v < prev, "erfc not strictly decreasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn kummer_at_zero_argument() {
        for (a, b) in [(0.5, 1.5), (1.25, 3.0), (7.0, 2.5)] {
            assert_eq!(kummer_m(a, b, 0.0, Accuracy::default()).unwrap(), 1.0);
        }
    }

    #[test]
    fn kummer_equal_parameters_is_exponential() {
        let m = kummer_m(1.5, 1.5, -0.25, Accuracy::default()).unwrap();
        assert!((m - (-0.25f64).exp()).abs() < 1e-15);
        assert!((m - 0.778_800_783_071_404_9).abs() < 1e-15);
    }

    #[test]
    fn kummer_half_three_halves_is_erf() {
        let t = 0.5;
        let m = kummer_m(0.5, 1.5, -t * t, Accuracy::default()).unwrap();
        let want = std::f64::consts::PI.sqrt() * erf_oracle(t) / (2.0 * t);
        assert!((m - want).abs() < 1e-13 * want);
        assert!((m - 0.922_562_012_825_584_9).abs() < 1e-13);
    }

    #[test]
    fn kummer_matches_reference_values() {
        let cases = [
            (1.25, 3.0, -0.25, 0.902_777_749_276_917_599_993_567_807_4),
            (2.25, 3.0, -0.25, 0.830_264_685_743_279_351_918_777_819_2),
            (1.75, 3.0, 0.25, 1.159_189_575_691_715_529_605_632_193_6),
            (0.5, 1.5, -1.0, 0.746_824_132_812_427_025_399_467_436_1),
            (3.0, 5.5, -1.0, 0.590_803_968_135_962_569_916_254_881_4),
        ];
        for (a, b, z, want) in cases {
            let got = kummer_m(a, b, z, Accuracy::default()).unwrap();
            assert!((got - want).abs() < 1e-13 * want, "M({a},{b},{z}) = {got}");
        }
    }

    #[test]
    fn kummer_transformation_against_direct_series() {
        let acc = Accuracy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let kappa: f64 = rng.gen_range(1.0..20.0);
            let alpha: f64 = rng.gen_range(0.1..2.0);
            let x = rng.gen_range(0.0..alpha * alpha / 4.0);
            let b = kappa + 0.5;
            for a in [kappa / 2.0, kappa / 2.0 + 1.0, kappa / 2.0 + 0.5] {
                let lhs = kummer_m(a, b, -x, acc).unwrap();
                let rhs = (-x).exp() * kummer_direct(b - a, b, x);
                let direct = kummer_direct(a, b, -x);
                assert!((lhs - rhs).abs() <= 10.0 * acc.rel_tol * lhs);
                assert!((lhs - direct).abs() <= 10.0 * acc.rel_tol * lhs);
            }
        }
    }

    #[test]
    fn kummer_derivative_relation() {
        // d/deta [eta^k M(k/2, k+1/2, -eta^2/4)] = k eta^{k-1} M(k/2+1, k+1/2, -eta^2/4)
        let acc = Accuracy::default();
        let f = |k: f64, e: f64| e.powf(k) * kummer_m(k / 2.0, k + 0.5, -e * e / 4.0, acc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k: f64 = rng.gen_range(1.0..8.0);
            let e: f64 = rng.gen_range(0.2..2.0);
            let h = 1e-5;
            let fd = (f(k, e + h) - f(k, e - h)) / (2.0 * h);
            let exact = k * e.powf(k - 1.0)
                * kummer_m(k / 2.0 + 1.0, k + 0.5, -e * e / 4.0, acc).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "k={k} eta={e}");
        }
    }

    #[test]
    fn kummer_rejects_bad_parameters() {
        let acc = Accuracy::default();
        assert!(matches!(
            kummer_m(1.0, -2.0, 0.5, acc),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            kummer_m(1.0, 0.0, 0.5, acc),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            kummer_m(1.0, 1.5, 1e3, acc),
            Err(Error::InvalidParameter(_))
        ));
        assert!(Accuracy::new(0.0, 10).is_err());
        assert!(Accuracy::new(1e-10, 0).is_err());
    }

    #[test]
    fn kummer_reports_non_convergence() {
        let acc = Accuracy::new(1e-13, 3).unwrap();
        assert!(matches!(
            kummer_m(2.0, 1.5, 5.0, acc),
            Err(Error::NonConvergence { terms: 3 })
        ));
    }
}
