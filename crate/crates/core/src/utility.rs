//! Noise density/CDF of the compound mechanism and the table of utility
//! metrics, all expressed through the MGF of 1/b.
//!
//! The released noise is a scale mixture of Laplace densities, so
//! f(x) = ½·M'(-|x|), F(x) = ½·M(-|x|) below zero mirrored above, and the
//! metrics are one-dimensional integrals of M and M' over [0, ∞).

use serde::{Serialize, Serializer};

use crate::dist::DistributionSpec;
use crate::quad::{integrate_to_infinity, TailIntegral};

/// Default absolute quadrature tolerance for reported metrics.
pub const QUAD_TOL: f64 = 1e-10;

/// Looser tolerance for optimizer inner loops.
pub const QUAD_TOL_FAST: f64 = 1e-8;

/// Decay-exponent floor below which a metric integral is declared divergent.
const P_FLOOR: f64 = 1.05;

/// A metric that may fail to converge (l1 needs E[b] < ∞, l2 needs E[b²] < ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Finite(f64),
    Divergent,
}

impl MetricValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            MetricValue::Finite(v) => Some(v),
            MetricValue::Divergent => None,
        }
    }

    fn from_tail(t: TailIntegral) -> Self {
        match t {
            TailIntegral::Finite { value, .. } => MetricValue::Finite(value),
            TailIntegral::Divergent { .. } => MetricValue::Divergent,
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Finite(v) => s.serialize_f64(*v),
            MetricValue::Divergent => s.serialize_str("divergent"),
        }
    }
}

/// Utility metrics of one spec at error bound γ.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityReport {
    pub l1: MetricValue,
    pub l2: MetricValue,
    /// Table-form entropy ∫ -M'(-x)·ln M'(-x) dx over the half line.
    pub entropy_table: MetricValue,
    /// entropy_table + ln 2: differential entropy of the full-line density.
    pub entropy_true: MetricValue,
    pub usefulness: f64,
    pub gamma: f64,
}

/// Noise density f(x) = ½·M'(-|x|); symmetric in x.
pub fn pdf_noise(spec: &DistributionSpec, x: f64) -> f64 {
    0.5 * spec.ln_mgf_deriv(-x.abs()).exp()
}

/// ln f(x), used by the privacy certification grid.
pub fn ln_pdf_noise(spec: &DistributionSpec, x: f64) -> f64 {
    spec.ln_mgf_deriv(-x.abs()) - std::f64::consts::LN_2
}

/// Noise CDF: ½·M(-|x|) for x < 0, 1 - ½·M(-x) for x ≥ 0.
pub fn cdf_noise(spec: &DistributionSpec, x: f64) -> f64 {
    if x < 0.0 {
        0.5 * spec.ln_mgf(x).exp()
    } else {
        1.0 - 0.5 * spec.ln_mgf(-x).exp()
    }
}

/// P(|noise| ≤ γ) = 1 - M(-γ).
pub fn usefulness(spec: &DistributionSpec, gamma: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    -spec.ln_mgf(-gamma).exp_m1()
}

/// Expected absolute error ∫₀^∞ M(-x) dx (equals E[b]).
pub fn l1_error(spec: &DistributionSpec) -> MetricValue {
    l1_error_tol(spec, QUAD_TOL)
}

pub fn l1_error_tol(spec: &DistributionSpec, tol: f64) -> MetricValue {
    let f = |x: f64| spec.ln_mgf(-x).exp();
    MetricValue::from_tail(integrate_to_infinity(&f, tol, P_FLOOR))
}

/// Root mean squared error √(2·∬ M(-u) du dx) with the inner integral from x
/// to ∞; by Fubini that is √(2·∫ x·M(-x) dx).
pub fn l2_error(spec: &DistributionSpec) -> MetricValue {
    l2_error_tol(spec, QUAD_TOL)
}

pub fn l2_error_tol(spec: &DistributionSpec, tol: f64) -> MetricValue {
    let f = |x: f64| x * spec.ln_mgf(-x).exp();
    match integrate_to_infinity(&f, tol, P_FLOOR) {
        TailIntegral::Finite { value, .. } => MetricValue::Finite((2.0 * value).sqrt()),
        TailIntegral::Divergent { .. } => MetricValue::Divergent,
    }
}

/// ∫₀^∞ -M'(-x)·ln M'(-x) dx, the table entry as written.
pub fn entropy_table(spec: &DistributionSpec) -> MetricValue {
    entropy_table_tol(spec, QUAD_TOL)
}

pub fn entropy_table_tol(spec: &DistributionSpec, tol: f64) -> MetricValue {
    let f = |x: f64| {
        let ln_d = spec.ln_mgf_deriv(-x);
        if ln_d == f64::NEG_INFINITY {
            0.0
        } else {
            -ln_d.exp() * ln_d
        }
    };
    MetricValue::from_tail(integrate_to_infinity(&f, tol, P_FLOOR))
}

/// Differential entropy of the noise density ½M'(-|x|) over the whole line.
pub fn entropy_true(spec: &DistributionSpec) -> MetricValue {
    match entropy_table(spec) {
        MetricValue::Finite(v) => MetricValue::Finite(v + std::f64::consts::LN_2),
        MetricValue::Divergent => MetricValue::Divergent,
    }
}

pub fn utility_report(spec: &DistributionSpec, gamma: f64) -> UtilityReport {
    let table = entropy_table(spec);
    UtilityReport {
        l1: l1_error(spec),
        l2: l2_error(spec),
        entropy_table: table,
        entropy_true: match table {
            MetricValue::Finite(v) => MetricValue::Finite(v + std::f64::consts::LN_2),
            MetricValue::Divergent => MetricValue::Divergent,
        },
        usefulness: usefulness(spec, gamma),
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{BaseFamily, Term};
    use crate::quad::integrate;

    fn deg(k0: f64) -> DistributionSpec {
        DistributionSpec::single(BaseFamily::Degenerate { k0 }).unwrap()
    }

    fn gamma(k: f64, theta: f64) -> DistributionSpec {
        DistributionSpec::single(BaseFamily::Gamma { k, theta }).unwrap()
    }

    #[test]
    fn pdf_reference_points() {
        assert!((pdf_noise(&deg(1.0), 0.0) - 0.5).abs() < 1e-14);
        // Laplace(b=1/2) density at 1: (1/2b)e^{-|x|/b} = e^{-2}
        let expected = 0.5 * 2.0 * (-2.0f64).exp();
        assert!((pdf_noise(&deg(2.0), 1.0) - expected).abs() < 1e-14);
        let expected = 0.5 * (2.0 * 0.5 * 1.5f64.powi(-3));
        assert!((pdf_noise(&gamma(2.0, 0.5), 1.0) - expected).abs() < 1e-12);
        // symmetry
        assert_eq!(
            pdf_noise(&gamma(2.0, 0.5), -1.3),
            pdf_noise(&gamma(2.0, 0.5), 1.3)
        );
    }

    #[test]
    fn gamma_pdf_agrees_with_mixture_quadrature() {
        // f(1) = ∫ f_Γ(s)·(s/2)e^{-s} ds, mixing over the drawn scale
        let (k, th) = (2.0, 0.5);
        let gamma_pdf = |s: f64| s.powf(k - 1.0) * (-s / th).exp() / (th.powf(k) * 1.0); // Γ(2)=1
        let integrand = |s: f64| gamma_pdf(s) * 0.5 * s * (-s).exp();
        let direct = integrate(&integrand, 0.0, 60.0, 1e-12).value;
        let got = pdf_noise(&gamma(k, th), 1.0);
        assert!((got - direct).abs() < 1e-10, "{got} vs {direct}");
    }

    #[test]
    fn cdf_reference_points() {
        let spec = gamma(2.0, 0.5);
        assert!((cdf_noise(&spec, 0.0) - 0.5).abs() < 1e-14);
        let lap = deg(1.0);
        let expected = 1.0 - 0.5 * (-1.0f64).exp();
        assert!((cdf_noise(&lap, 1.0) - expected).abs() < 1e-14);
        assert!((expected - 0.816060).abs() < 1e-6);
        // normalization far out (exponential-tailed spec)
        let far = 50.0 / lap.mean_inv_b();
        assert!((cdf_noise(&lap, far) - 1.0).abs() < 1e-12);
        assert!(cdf_noise(&spec, 1e6) > 1.0 - 1e-9);
        // antisymmetry
        for &x in &[0.3, 1.0, 4.2] {
            let s = cdf_noise(&spec, x) + cdf_noise(&spec, -x);
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn usefulness_reference_points() {
        assert!((usefulness(&deg(1.0), 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert!((usefulness(&gamma(2.0, 0.5), 1.0) - (1.0 - 1.5f64.powi(-2))).abs() < 1e-14);
        assert!(usefulness(&gamma(2.0, 0.5), 1e-10) < 1e-9);
        // equals the CDF mass of [-γ, γ]
        let spec = gamma(2.0, 0.5);
        for &g in &[0.2, 1.0, 3.0] {
            let via_cdf = cdf_noise(&spec, g) - cdf_noise(&spec, -g);
            assert!((usefulness(&spec, g) - via_cdf).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_l2_entropy_closed_forms() {
        // Laplace(b = 1/2): E|noise| = b, RMSE = √2·b, table entropy = 1 - ln 2...
        // for b=1: table value is exactly 1
        let l1 = l1_error(&deg(2.0)).finite().unwrap();
        assert!((l1 - 0.5).abs() < 1e-9);
        let l2 = l2_error(&deg(2.0)).finite().unwrap();
        assert!((l2 - 0.5f64.sqrt()).abs() < 1e-9);
        let h = entropy_table(&deg(1.0)).finite().unwrap();
        assert!((h - 1.0).abs() < 1e-8);
        let ht = entropy_true(&deg(1.0)).finite().unwrap();
        assert!((ht - (1.0 + std::f64::consts::LN_2)).abs() < 1e-8);
    }

    #[test]
    fn gamma_l1_matches_expectation_of_b() {
        // E[b] = E[1/S] = 1/(θ(k-1)) for S ~ Γ(k, θ), k > 1
        let l1 = l1_error(&gamma(3.0, 0.4)).finite().unwrap();
        assert!((l1 - 1.0 / (0.4 * 2.0)).abs() < 1e-8, "{l1}");
        // E[b²] = 1/(θ²(k-1)(k-2)) for k > 2
        let l2 = l2_error(&gamma(3.0, 0.4)).finite().unwrap();
        let expected = (2.0 / (0.4f64.powi(2) * 2.0 * 1.0)).sqrt();
        assert!((l2 - expected).abs() < 1e-7, "{l2} vs {expected}");
    }

    #[test]
    fn divergent_metrics_are_flagged() {
        // k = 1: E[b] diverges, l1 must report divergent
        assert_eq!(l1_error(&gamma(1.0, 0.5)), MetricValue::Divergent);
        // k = 2: l1 finite but l2 diverges
        assert!(l1_error(&gamma(2.0, 0.5)).finite().is_some());
        assert_eq!(l2_error(&gamma(2.0, 0.5)), MetricValue::Divergent);
        // uniform reaching down to zero has E[b] = ∞ as well
        let u = DistributionSpec::single(BaseFamily::Uniform { a: 0.0, b: 2.0 }).unwrap();
        assert_eq!(l1_error(&u), MetricValue::Divergent);
        // but mixing in a component bounded away from zero restores it
        let mix = DistributionSpec::new(vec![
            Term {
                coef: 1.0,
                family: BaseFamily::Uniform { a: 0.0, b: 2.0 },
            },
            Term {
                coef: 1.0,
                family: BaseFamily::Degenerate { k0: 0.5 },
            },
        ])
        .unwrap();
        assert!(l1_error(&mix).finite().is_some());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let specs = [
            gamma(2.0, 0.5),
            deg(0.7),
            DistributionSpec::new(vec![
                Term {
                    coef: 0.5,
                    family: BaseFamily::Uniform { a: 0.5, b: 2.0 },
                },
                Term {
                    coef: 0.5,
                    family: BaseFamily::Bernoulli {
                        p: 0.3,
                        x0: 0.4,
                        x1: 1.1,
                    },
                },
            ])
            .unwrap(),
        ];
        for spec in &specs {
            let f = |x: f64| spec.ln_mgf_deriv(-x).exp();
            let half = crate::quad::integrate_to_infinity(&f, 1e-10, 1.05)
                .finite_value()
                .unwrap();
            assert!((half - 1.0).abs() < 1e-8, "spec {spec}: {half}");
        }
    }

    #[test]
    fn l1_below_l2_where_both_converge() {
        let specs = [gamma(3.0, 0.4), gamma(5.0, 1.0), deg(2.0)];
        for spec in &specs {
            let l1 = l1_error(spec).finite().unwrap();
            let l2 = l2_error(spec).finite().unwrap();
            assert!(l1 <= l2 + 1e-12, "spec {spec}: l1={l1} l2={l2}");
        }
    }
}
