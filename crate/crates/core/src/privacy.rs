//! Differential-privacy guarantees of the compound Laplace mechanism.
//!
//! The exact guarantee of a mechanism whose reciprocal scale is drawn from a
//! spec is ε = ln(E[1/b] / M'_{1/b}(-Δq)). Single families additionally have
//! closed forms, the mean per-draw leakage is bounded by ln M_{1/b}(Δq), and
//! a spec can only improve on the plain Laplace baseline when ε is strictly
//! below that average-leakage bound (the necessary condition).

use serde::Serialize;

use crate::dist::{BaseFamily, DistributionSpec};
use crate::math::log_add_exp;

/// Privacy analysis of one spec at sensitivity Δq.
#[derive(Debug, Clone, Serialize)]
pub struct PrivacyReport {
    /// ε from the general MGF formula.
    pub eps_general: f64,
    /// Per-family closed-form value, when the spec is a single (scaled) family.
    pub eps_closed_form: Option<f64>,
    /// ln E[e^{Δq/b}]; +∞ (serialized as null) when the MGF diverges there.
    pub eps_avg_leakage: f64,
    pub necessary_condition_holds: bool,
    /// M(Δq) - e^ε; +∞ when the MGF diverges at Δq.
    pub necc_margin: f64,
    /// The average-leakage bound is vacuous when this is set.
    pub mgf_divergent: bool,
    pub sensitivity: f64,
}

/// Exact ε of the mechanism: ln(E[1/b] / M'_{1/b}(-Δq)).
///
/// For combinations this expands through the product rule, which is exactly
/// the combined-PDF guarantee with numerator Σ aⱼE[xⱼ] and denominator
/// Σ aⱼM'ⱼ(-aⱼΔq)Π_{i≠j}Mᵢ(-aᵢΔq).
pub fn eps_general(spec: &DistributionSpec, delta_q: f64) -> f64 {
    assert!(delta_q > 0.0, "sensitivity must be positive");
    let ln_num = spec.mean_inv_b().ln();
    let ln_den = spec.ln_mgf_deriv(-delta_q);
    debug_assert!(ln_den.is_finite(), "M' at negative arguments always exists");
    ln_num - ln_den
}

/// The per-family closed-form guarantee, reading the family as the law of 1/b.
///
/// Degenerate, Gamma, Uniform and TruncGauss match `eps_general` exactly.
/// Bernoulli is the one family whose closed-form value is the average-leakage
/// bound ln E[e^{Δq/b}] instead of the exact log-ratio, so for it this is
/// ≥ `eps_general`; both are reported rather than silently reconciled.
pub fn eps_closed_form(family: &BaseFamily, delta_q: f64) -> f64 {
    assert!(delta_q > 0.0, "sensitivity must be positive");
    match *family {
        BaseFamily::Degenerate { k0 } => delta_q * k0,
        BaseFamily::Bernoulli { p, x0, x1 } => log_add_exp(
            p.ln() + delta_q * x0,
            (1.0 - p).ln() + delta_q * x1,
        ),
        BaseFamily::Gamma { k, theta } => (k + 1.0) * (delta_q * theta).ln_1p(),
        BaseFamily::Uniform { a, b } => {
            let alpha = a * delta_q;
            let beta = b * delta_q;
            let num = beta * beta - alpha * alpha;
            let den = 2.0 * ((1.0 + alpha) * (-alpha).exp() - (1.0 + beta) * (-beta).exp());
            (num / den).ln()
        }
        BaseFamily::TruncGauss { .. } => {
            // numerator: truncated-normal mean; denominator: M' at -Δq
            family.mean().ln() - family.ln_mgf_deriv(-delta_q)
        }
    }
}

/// Verdict of the improvement necessary condition e^ε < M(Δq).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NecessaryCondition {
    pub holds: bool,
    /// M(Δq) - e^ε, saturating to ±∞ past the f64 range.
    pub margin: f64,
    /// M(Δq) does not exist; the condition holds trivially.
    pub mgf_divergent: bool,
}

/// Checks e^ε < M_{1/b}(Δq), strictly; equality is reported as failing.
pub fn necessary_condition(spec: &DistributionSpec, delta_q: f64) -> NecessaryCondition {
    let eps = eps_general(spec, delta_q);
    let ln_m = spec.ln_mgf(delta_q);
    if ln_m == f64::INFINITY {
        return NecessaryCondition {
            holds: true,
            margin: f64::INFINITY,
            mgf_divergent: true,
        };
    }
    let holds = eps < ln_m;
    let margin = if eps.max(ln_m) > 700.0 {
        if holds {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        ln_m.exp() - eps.exp()
    };
    NecessaryCondition {
        holds,
        margin,
        mgf_divergent: false,
    }
}

/// Smallest Gamma shape k at which the necessary condition holds, for
/// θ·Δq = `theta_ratio`, located by bisection to 1e-6.
///
/// The condition (k+1)ln(1+r) < -k·ln(1-r) is monotone in k, so the root of
/// g(k) = -k·ln(1-r²) - ln(1+r) brackets cleanly.
pub fn gamma_threshold(delta_q: f64, theta_ratio: f64) -> f64 {
    assert!(delta_q > 0.0);
    assert!(theta_ratio > 0.0 && theta_ratio < 1.0);
    let theta = theta_ratio / delta_q;
    let margin = |k: f64| {
        let spec = DistributionSpec::single(BaseFamily::Gamma { k, theta })
            .expect("gamma parameters are valid");
        spec.ln_mgf(delta_q) - eps_general(&spec, delta_q)
    };
    let mut lo = 1e-6;
    let mut hi = 1.0;
    while margin(hi) <= 0.0 {
        hi *= 2.0;
        assert!(hi < 1e9, "no improving shape found");
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Improvement test for a spec read as the law of ε itself (Δq = 1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImprovementCheck {
    /// Usefulness strictly beats the ε₀ Laplace baseline at ζ.
    pub improves: bool,
    pub usefulness: f64,
    pub baseline_usefulness: f64,
    /// |ln M(1) - ε₀| ≤ 1e-6: the spec spends exactly the e^{ε₀} budget.
    pub budget_matched: bool,
    pub avg_leakage_log: f64,
}

pub fn improvement_criterion(spec: &DistributionSpec, eps0: f64, zeta: f64) -> ImprovementCheck {
    assert!(eps0 > 0.0 && zeta > 0.0);
    let usefulness = -spec.ln_mgf(-zeta).exp_m1();
    let baseline = -(-zeta * eps0).exp_m1();
    let avg_leakage_log = spec.ln_mgf(1.0);
    ImprovementCheck {
        improves: usefulness > baseline,
        usefulness,
        baseline_usefulness: baseline,
        budget_matched: (avg_leakage_log - eps0).abs() <= 1e-6,
        avg_leakage_log,
    }
}

/// Full privacy analysis for one spec.
pub fn analyze(spec: &DistributionSpec, delta_q: f64) -> PrivacyReport {
    let eps = eps_general(spec, delta_q);
    let necc = necessary_condition(spec, delta_q);
    let closed = single_scaled_family(spec).map(|fam| eps_closed_form(&fam, delta_q));
    PrivacyReport {
        eps_general: eps,
        eps_closed_form: closed,
        eps_avg_leakage: spec.ln_mgf(delta_q),
        necessary_condition_holds: necc.holds,
        necc_margin: necc.margin,
        mgf_divergent: necc.mgf_divergent,
        sensitivity: delta_q,
    }
}

/// For a one-term spec, the coefficient folds into the family (c·X stays in
/// the same family), making the closed forms applicable.
fn single_scaled_family(spec: &DistributionSpec) -> Option<BaseFamily> {
    let active: Vec<_> = spec.terms().iter().filter(|t| t.coef > 0.0).collect();
    match active.as_slice() {
        [term] => Some(term.family.scaled(term.coef)),
        _ => None,
    }
}
