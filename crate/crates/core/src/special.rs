//! Standard-normal special functions used by the truncated-Gaussian family.
//!
//! Privacy guarantees are log-ratios of MGF values, which amplifies any error
//! in Φ, so everything here is built on libm's sub-ulp erf/erfc and switches
//! to asymptotic tail expansions only where erfc underflows. Interval
//! probabilities additionally expose their quadratic tail exponent separately
//! (`IntervalLn`) so the e^{σ²t²/2} prefactor of a tilted Gaussian can be
//! cancelled symbolically instead of as a difference of ~1e10-sized floats.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::math::ln_one_minus_exp;

/// ln √(2π)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Bound beyond which Q(x) is evaluated by its asymptotic expansion.
const TAIL_SWITCH: f64 = 36.0;

/// Standard normal density φ(x).
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// ln φ(x).
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF Φ(x).
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// ln(1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸), the Q-tail correction factor.
fn ln_tail_series(x: f64) -> f64 {
    let ix2 = 1.0 / (x * x);
    (ix2 * (-1.0 + ix2 * (3.0 + ix2 * (-15.0 + ix2 * 105.0)))).ln_1p()
}

/// ln Q(x) = ln(1 - Φ(x)), any finite x.
pub fn ln_norm_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x >= TAIL_SWITCH {
        -0.5 * x * x - x.ln() - LN_SQRT_2PI + ln_tail_series(x)
    } else if x <= -TAIL_SWITCH {
        // Q(x) = 1 - Q(-x) with Q(-x) below underflow of significance
        -ln_norm_tail(-x).exp()
    } else {
        (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln()
    }
}

/// Which tail a log-interval probability's quadratic term comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// lead = -a²/2 (interval in the upper tail, a ≥ 36)
    Right,
    /// lead = -b²/2 (interval in the lower tail, b ≤ -36)
    Left,
    /// lead = 0
    Center,
}

/// ln(Φ(b) - Φ(a)) split as `lead + rest` with `lead` the dominant -x²/2
/// term, kept separate so callers can cancel it in closed form.
#[derive(Debug, Clone, Copy)]
pub struct IntervalLn {
    pub kind: TailKind,
    pub lead: f64,
    pub rest: f64,
}

impl IntervalLn {
    pub fn total(&self) -> f64 {
        self.lead + self.rest
    }
}

/// ln(Φ(b) - Φ(a)) for a < b; `b` may be +∞.
pub fn ln_norm_interval(a: f64, b: f64) -> f64 {
    ln_norm_interval_parts(a, b).total()
}

pub fn ln_norm_interval_parts(a: f64, b: f64) -> IntervalLn {
    debug_assert!(a <= b);
    if a >= TAIL_SWITCH {
        IntervalLn {
            kind: TailKind::Right,
            lead: -0.5 * a * a,
            rest: upper_tail_rest(a, b),
        }
    } else if b <= -TAIL_SWITCH {
        // mirror: Φ(b) - Φ(a) = Q(-b) - Q(-a)
        IntervalLn {
            kind: TailKind::Left,
            lead: -0.5 * b * b,
            rest: upper_tail_rest(-b, -a),
        }
    } else {
        IntervalLn {
            kind: TailKind::Center,
            lead: 0.0,
            rest: center_interval_ln(a, b),
        }
    }
}

/// rest of ln(Q(a) - Q(b)) for b > a ≥ 36 after removing -a²/2.
fn upper_tail_rest(a: f64, b: f64) -> f64 {
    let base = -a.ln() - LN_SQRT_2PI + ln_tail_series(a);
    if b == f64::INFINITY {
        return base;
    }
    let gap = b - a;
    // ln(Q(b)/Q(a)) assembled symbolically; strictly negative
    let ln_ratio = -gap * (0.5 * (a + b)) + (a / b).ln() + ln_tail_series(b) - ln_tail_series(a);
    if ln_ratio >= -1e-15 {
        // interval thinner than the expansion resolves: Q(a)-Q(b) ≈ φ(mid)·gap
        let mid = 0.5 * (a + b);
        return -0.5 * (mid - a) * (mid + a) - LN_SQRT_2PI + gap.ln();
    }
    base + ln_one_minus_exp(ln_ratio)
}

/// ln(Φ(b) - Φ(a)) with a < 36 and b > -36 (no extreme lead term).
fn center_interval_ln(a: f64, b: f64) -> f64 {
    let la = ln_norm_tail(a);
    let d = if b == f64::INFINITY {
        return la;
    } else {
        ln_norm_tail(b) - la
    };
    if d >= -1e-15 {
        return ln_norm_pdf(0.5 * (a + b)) + (b - a).ln();
    }
    la + ln_one_minus_exp(d)
}

/// Mean of a normal N(mu, sigma²) truncated to [lo, hi]; `hi` may be +∞.
///
/// Stable for arbitrarily deep truncation tails: the Mills ratio is taken in
/// log space, and for standardized lower bounds past ~1000 the shifted form
/// `lo + σ·(λ(α)-α)` is expanded so the result never cancels to ≤ 0.
pub fn trunc_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(sigma > 0.0 && lo < hi);
    let a = (lo - mu) / sigma;
    let b = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        (hi - mu) / sigma
    };

    if b.is_finite() && b - a < 1e-12 * a.abs().max(1.0) {
        return 0.5 * (lo + hi);
    }

    if a >= 1000.0 {
        return lo + sigma * mills_gap_asymptotic(a, b);
    }
    if a >= 0.0 {
        // R = (φ(a)-φ(b)) / (Q(a)-Q(b)) via log-space differences
        let ln_num = if b == f64::INFINITY {
            ln_norm_pdf(a)
        } else {
            ln_norm_pdf(a) + ln_one_minus_exp((-0.5 * (b - a) * (b + a)).min(0.0))
        };
        let ln_den = ln_norm_interval(a, b);
        return mu + sigma * (ln_num - ln_den).exp();
    }
    if b <= 0.0 {
        // reflect into the upper tail
        return -trunc_normal_mean(-mu, sigma, -hi, -lo);
    }

    // bounds straddle mu: direct evaluation is well conditioned
    let z = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) + libm::erf(-a * FRAC_1_SQRT_2));
    let num = norm_pdf(a) - if b == f64::INFINITY { 0.0 } else { norm_pdf(b) };
    mu + sigma * num / z
}

/// λ(a) - a for the truncated-normal Mills ratio λ, valid for a ≥ 1000.
///
/// Derived from Q(x) = φ(x)/x·D(x), D = 1 - 1/x² + 3/x⁴ - 15/x⁶, with the
/// finite-upper-bound corrections E1 = φ(b)/φ(a), E2 = Q(b)/Q(a) retained.
fn mills_gap_asymptotic(a: f64, b: f64) -> f64 {
    let ia2 = 1.0 / (a * a);
    let one_minus_d = ia2 * (1.0 + ia2 * (-3.0 + ia2 * 15.0));
    let d = 1.0 - one_minus_d;
    let (e1, e2) = if b == f64::INFINITY {
        (0.0, 0.0)
    } else {
        let e1 = (-(b - a) * (b + a) * 0.5).exp();
        let e2 = (ln_norm_tail(b) - ln_norm_tail(a)).exp();
        (e1, e2)
    };
    a * (one_minus_d - e1 + d * e2) / (d * (1.0 - e2))
}

/// Inverse standard normal CDF (Wichura's AS 241, double precision).
pub fn inv_norm_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&INV_A, r) / poly(&INV_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&INV_C, r) / poly(&INV_D, r)
    } else {
        let r = r - 5.0;
        poly(&INV_E, r) / poly(&INV_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

#[allow(clippy::excessive_precision)]
const INV_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
#[allow(clippy::excessive_precision)]
const INV_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
#[allow(clippy::excessive_precision)]
const INV_C: [f64; 8] = [
    1.423_437_110_749_683_577_3e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605e0,
    1.270_458_252_452_368_382_6e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_3e-2,
    7.745_450_142_783_414_076_4e-4,
];
#[allow(clippy::excessive_precision)]
const INV_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_9e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_7e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_2e-9,
];
#[allow(clippy::excessive_precision)]
const INV_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_2e-5,
    2.010_334_399_292_288_132_6e-7,
];
#[allow(clippy::excessive_precision)]
const INV_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_3e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_6e-15,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((norm_cdf(-1.0) - 0.15865525393145707).abs() < 1e-15);
    }

    #[test]
    fn ln_tail_matches_erfc_then_asymptotic() {
        for &x in &[-20.0, -1.0, 0.0, 0.5, 1.0, 3.0, 8.0, 20.0, 35.0] {
            let direct = (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln();
            assert!((ln_norm_tail(x) - direct).abs() < 1e-12, "x={x}");
        }
        // continuity across the switch at 36
        let below = ln_norm_tail(35.999_999);
        let above = ln_norm_tail(36.000_001);
        assert!((below - above).abs() < 1e-3);
        assert!(ln_norm_tail(1e6).is_finite());
        assert!(ln_norm_tail(100.0) < ln_norm_tail(50.0));
    }

    #[test]
    fn interval_log_prob_consistency() {
        let cases = [
            (0.2, 1.3),
            (-2.0, -0.4),
            (-1.1, 0.7),
            (3.0, 8.0),
            (-8.0, -3.0),
        ];
        for (a, b) in cases {
            let direct = (norm_cdf(b) - norm_cdf(a)).ln();
            assert!(
                (ln_norm_interval(a, b) - direct).abs() < 1e-12,
                "[{a},{b}]"
            );
        }
        // deep upper tail: cross-check lead/rest split against erfc where it
        // still resolves (x ≈ 37 is fine in f64)
        let p = ln_norm_interval_parts(36.5, 37.0);
        assert_eq!(p.kind, TailKind::Right);
        let direct = (0.5 * (libm::erfc(36.5 * FRAC_1_SQRT_2) - libm::erfc(37.0 * FRAC_1_SQRT_2)))
            .ln();
        assert!((p.total() - direct).abs() < 1e-10, "{} {}", p.total(), direct);
        // mirrored lower tail
        let q = ln_norm_interval_parts(-37.0, -36.5);
        assert_eq!(q.kind, TailKind::Left);
        assert!((q.total() - direct).abs() < 1e-10);
        // thin interval matches the density midpoint form (width taken at
        // f64 resolution)
        let hi = 40.0 + 1e-9;
        let thin = ln_norm_interval(40.0, hi);
        let approx = ln_norm_pdf(40.0) + (hi - 40.0).ln();
        assert!((thin - approx).abs() < 1e-6);
        // below f64 resolution the interval collapses to zero mass
        assert_eq!(ln_norm_interval(40.0, 40.0 + 1e-18), f64::NEG_INFINITY);
    }

    #[test]
    fn trunc_mean_reference_values() {
        // half-normal: E = σ√(2/π)
        let m = trunc_normal_mean(0.0, 1.0, 0.0, f64::INFINITY);
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        // symmetric truncation keeps the mean
        let m = trunc_normal_mean(2.0, 0.7, 1.0, 3.0);
        assert!((m - 2.0).abs() < 1e-14);
        // one-sided lower truncation: E[X|X>a] = μ + σφ(α)/Q(α)
        let (mu, sigma, lo) = (1.0, 2.0, 4.0);
        let alpha: f64 = (lo - mu) / sigma;
        let expected = mu + sigma * norm_pdf(alpha) / (0.5 * libm::erfc(alpha * FRAC_1_SQRT_2));
        let m = trunc_normal_mean(mu, sigma, lo, f64::INFINITY);
        assert!((m - expected).abs() < 1e-12);
    }

    #[test]
    fn trunc_mean_stays_in_bounds_under_extreme_tilt() {
        // regimes the optimizer probes: enormous standardized bounds
        for &mu in &[-1e3, -1e5, -3e7] {
            let m = trunc_normal_mean(mu, 1.0, 0.0, 1.0);
            assert!(m > 0.0 && m < 1.0, "mu={mu} gave {m}");
        }
        // asymptotic branch agrees with 1/α to leading order
        let a = trunc_normal_mean(-999.0, 1.0, 0.0, f64::INFINITY);
        let b = trunc_normal_mean(-1001.0, 1.0, 0.0, f64::INFINITY);
        assert!((a * 999.0 - 1.0).abs() < 1e-3);
        assert!((b * 1001.0 - 1.0).abs() < 1e-3);
        // reflected branch
        let m = trunc_normal_mean(10.0, 0.5, 0.0, 2.0);
        assert!(m > 1.9 && m < 2.0);
    }

    #[test]
    fn inverse_cdf_round_trip() {
        for &p in &[1e-300, 1e-12, 0.025, 0.4, 0.5, 0.8, 0.975, 1.0 - 1e-12] {
            let x = inv_norm_cdf(p);
            let back = norm_cdf(x);
            assert!(
                (back - p).abs() <= 1e-9 * p + 1e-15,
                "p={p} x={x} back={back}"
            );
        }
        assert!((inv_norm_cdf(0.975) - 1.959963984540054).abs() < 1e-12);
        assert_eq!(inv_norm_cdf(0.5), 0.0);
    }
}
