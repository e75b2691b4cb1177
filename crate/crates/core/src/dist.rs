//! The search space of randomizing distributions for the reciprocal scale.
//!
//! A mechanism draws 1/b from a non-negative linear combination of base
//! families; every quantity downstream (privacy guarantee, noise density,
//! utility metrics) is expressed through the MGF of that combination, so this
//! module is the numerical foundation of the crate. MGFs and their
//! derivatives are evaluated in log space: for the combination Y = Σ aᵢxᵢ,
//!
//!   M_Y(t)  = Π M_{xᵢ}(aᵢt)
//!   M_Y'(t) = Σⱼ aⱼ M'_{xⱼ}(aⱼt) Π_{i≠j} M_{xᵢ}(aᵢt)
//!
//! and an MGF that does not exist at t (Gamma with aᵢ·t·θ ≥ 1) is reported
//! as +∞, matching its limit behaviour in every comparison that uses it.

use rand::Rng;
use rand_distr::Distribution;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::math::{log_add_exp, log_sum_exp};
use crate::special::{
    inv_norm_cdf, ln_norm_interval_parts, norm_cdf, trunc_normal_mean, TailKind,
};

/// Upper truncation bound: finite or unbounded ("inf" on the wire).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    Finite(f64),
    Inf,
}

impl TailBound {
    pub fn as_f64(self) -> f64 {
        match self {
            TailBound::Finite(v) => v,
            TailBound::Inf => f64::INFINITY,
        }
    }
}

impl Serialize for TailBound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TailBound::Finite(v) => s.serialize_f64(*v),
            TailBound::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TailBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(TailBound::Finite(v)),
            Raw::Text(s) if s == "inf" => Ok(TailBound::Inf),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "hi must be a number or \"inf\", got \"{s}\""
            ))),
        }
    }
}

/// Invalid distribution parameters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{family}: {field} must be {requirement}, got {value}")]
    BadParameter {
        family: &'static str,
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("terms must be non-empty")]
    NoTerms,
    #[error("term {index}: coefficient must be non-negative and finite, got {value}")]
    BadCoefficient { index: usize, value: f64 },
    #[error("at least one coefficient must be strictly positive")]
    AllCoefficientsZero,
    #[error("invalid spec JSON: {0}")]
    Json(String),
}

fn check(
    ok: bool,
    family: &'static str,
    field: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<(), SpecError> {
    if ok {
        Ok(())
    } else {
        Err(SpecError::BadParameter {
            family,
            field,
            requirement,
            value,
        })
    }
}

/// One member of the base search space. Support is a subset of [0, ∞) by
/// construction, so M(t) exists for every t ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    Degenerate {
        k0: f64,
    },
    Bernoulli {
        p: f64,
        x0: f64,
        x1: f64,
    },
    Gamma {
        k: f64,
        theta: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    TruncGauss {
        mu: f64,
        sigma: f64,
        lo: f64,
        hi: TailBound,
    },
}

impl BaseFamily {
    pub fn validate(&self) -> Result<(), SpecError> {
        match *self {
            BaseFamily::Degenerate { k0 } => {
                check(k0 > 0.0 && k0.is_finite(), "degenerate", "k0", "> 0", k0)
            }
            BaseFamily::Bernoulli { p, x0, x1 } => {
                check((0.0..=1.0).contains(&p), "bernoulli", "p", "in [0, 1]", p)?;
                check(x0 > 0.0 && x0.is_finite(), "bernoulli", "x0", "> 0", x0)?;
                check(x1 > 0.0 && x1.is_finite(), "bernoulli", "x1", "> 0", x1)
            }
            BaseFamily::Gamma { k, theta } => {
                check(k > 0.0 && k.is_finite(), "gamma", "k", "> 0", k)?;
                check(theta > 0.0 && theta.is_finite(), "gamma", "theta", "> 0", theta)
            }
            BaseFamily::Uniform { a, b } => {
                check(a >= 0.0 && a.is_finite(), "uniform", "a", ">= 0", a)?;
                check(b > a && b.is_finite(), "uniform", "b", "> a", b)
            }
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => {
                check(mu.is_finite(), "trunc_gauss", "mu", "finite", mu)?;
                check(sigma > 0.0 && sigma.is_finite(), "trunc_gauss", "sigma", "> 0", sigma)?;
                check(lo >= 0.0 && lo.is_finite(), "trunc_gauss", "lo", ">= 0", lo)?;
                let h = hi.as_f64();
                check(h > lo, "trunc_gauss", "hi", "> lo (or inf)", h)
            }
        }
    }

    /// ln M(t); +∞ when the MGF does not exist at t.
    pub fn ln_mgf(&self, t: f64) -> f64 {
        match *self {
            BaseFamily::Degenerate { k0 } => t * k0,
            BaseFamily::Bernoulli { p, x0, x1 } => {
                if t == 0.0 {
                    0.0 // exact normalization; the log-sum rounds at ~1 ulp
                } else {
                    log_add_exp(p.ln() + t * x0, (1.0 - p).ln() + t * x1)
                }
            }
            BaseFamily::Gamma { k, theta } => {
                if theta * t >= 1.0 {
                    f64::INFINITY
                } else {
                    -k * (-theta * t).ln_1p()
                }
            }
            BaseFamily::Uniform { a, b } => {
                if t == 0.0 {
                    0.0
                } else if t < 0.0 {
                    let u = t * (b - a);
                    t * a + (-u.exp_m1()).ln() - (-u).ln()
                } else {
                    let v = t * (b - a);
                    t * b + (-(-v).exp_m1()).ln() - v.ln()
                }
            }
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => {
                trunc_gauss_ln_mgf(mu, sigma, lo, hi.as_f64(), t)
            }
        }
    }

    /// ln M'(t); the derivative is E[X e^{tX}] > 0, so the log is finite
    /// wherever the MGF exists.
    pub fn ln_mgf_deriv(&self, t: f64) -> f64 {
        match *self {
            BaseFamily::Degenerate { k0 } => k0.ln() + t * k0,
            BaseFamily::Bernoulli { p, x0, x1 } => log_add_exp(
                p.ln() + x0.ln() + t * x0,
                (1.0 - p).ln() + x1.ln() + t * x1,
            ),
            BaseFamily::Gamma { k, theta } => {
                if theta * t >= 1.0 {
                    f64::INFINITY
                } else {
                    k.ln() + theta.ln() - (k + 1.0) * (-theta * t).ln_1p()
                }
            }
            BaseFamily::Uniform { a, b } => uniform_ln_mgf_deriv(a, b, t),
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => {
                // exponential tilting by e^{tX} keeps a truncated normal,
                // shifting the location to mu + sigma^2 t
                let tilted = trunc_normal_mean(mu + sigma * sigma * t, sigma, lo, hi.as_f64());
                self.ln_mgf(t) + tilted.ln()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BaseFamily::Degenerate { k0 } => k0,
            BaseFamily::Bernoulli { p, x0, x1 } => p * x0 + (1.0 - p) * x1,
            BaseFamily::Gamma { k, theta } => k * theta,
            BaseFamily::Uniform { a, b } => 0.5 * (a + b),
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => {
                trunc_normal_mean(mu, sigma, lo, hi.as_f64())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseFamily::Degenerate { k0 } => k0,
            BaseFamily::Bernoulli { p, x0, x1 } => {
                if rng.random::<f64>() < p {
                    x0
                } else {
                    x1
                }
            }
            BaseFamily::Gamma { k, theta } => rand_distr::Gamma::new(k, theta)
                .expect("parameters validated on construction")
                .sample(rng),
            BaseFamily::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => {
                sample_trunc_gauss(mu, sigma, lo, hi.as_f64(), rng)
            }
        }
    }

    /// The family of c·X for c > 0; linear scaling stays inside the space.
    pub fn scaled(&self, c: f64) -> BaseFamily {
        debug_assert!(c > 0.0);
        match *self {
            BaseFamily::Degenerate { k0 } => BaseFamily::Degenerate { k0: c * k0 },
            BaseFamily::Bernoulli { p, x0, x1 } => BaseFamily::Bernoulli {
                p,
                x0: c * x0,
                x1: c * x1,
            },
            BaseFamily::Gamma { k, theta } => BaseFamily::Gamma { k, theta: c * theta },
            BaseFamily::Uniform { a, b } => BaseFamily::Uniform { a: c * a, b: c * b },
            BaseFamily::TruncGauss { mu, sigma, lo, hi } => BaseFamily::TruncGauss {
                mu: c * mu,
                sigma: c * sigma,
                lo: c * lo,
                hi: match hi {
                    TailBound::Finite(h) => TailBound::Finite(c * h),
                    TailBound::Inf => TailBound::Inf,
                },
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseFamily::Degenerate { .. } => "degenerate",
            BaseFamily::Bernoulli { .. } => "bernoulli",
            BaseFamily::Gamma { .. } => "gamma",
            BaseFamily::Uniform { .. } => "uniform",
            BaseFamily::TruncGauss { .. } => "trunc_gauss",
        }
    }
}

/// ln M(t) for a normal truncated to [lo, hi] ⊂ [0, ∞).
///
/// Tilting multiplies by e^{μt+σ²t²/2} and shifts the standardized bounds by
/// σt. The quadratic prefactor and the interval's own -x²/2 tail exponent
/// cancel analytically (e.g. μt + σ²t²/2 - (α-σt)²/2 = t·lo - α²/2), which
/// the lead/rest split from `special` makes exact; summing the ~σ²t² floats
/// directly would lose all precision once σ|t| passes ~10³.
fn trunc_gauss_ln_mgf(mu: f64, sigma: f64, lo: f64, hi: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let s = sigma * t;
    if s.abs() > 1e150 {
        // far past any physically meaningful tilt; keep the value sane for
        // tail probes: decay at least like e^{t·lo}/|s|
        return if t < 0.0 {
            t * lo - s.abs().ln_1p()
        } else if hi.is_finite() {
            t * hi
        } else {
            f64::INFINITY
        };
    }
    let alpha = (lo - mu) / sigma;
    let beta = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        (hi - mu) / sigma
    };
    let beta_shift = if beta == f64::INFINITY {
        f64::INFINITY
    } else {
        beta - s
    };
    let shifted = ln_norm_interval_parts(alpha - s, beta_shift);
    let base = ln_norm_interval_parts(alpha, beta);
    use TailKind::{Center, Left, Right};
    let k = match (shifted.kind, base.kind) {
        (Right, Right) => t * lo,
        (Right, Center) => t * lo - 0.5 * alpha * alpha,
        (Center, Right) => {
            let at = alpha - s;
            t * lo + 0.5 * at * at
        }
        (Left, Left) => t * hi,
        (Left, Center) => t * hi - 0.5 * beta * beta,
        (Center, Left) => {
            let bt = beta - s;
            t * hi + 0.5 * bt * bt
        }
        (Center, Center) => mu * t + 0.5 * s * s,
        // opposite tails only meet for outlandish parameter corners
        _ => mu * t + 0.5 * s * s + shifted.lead - base.lead,
    };
    k + shifted.rest - base.rest
}

/// ln E[X e^{tX}] for X ~ U(a, b).
///
/// Near t = 0 the closed form cancels to O(t²), so a moment series is used
/// for |t|·b ≤ 1/2; elsewhere the expm1 rearrangement keeps one benign
/// subtraction. At exactly t = 0 this is ln((a+b)/2).
fn uniform_ln_mgf_deriv(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        return (0.5 * (a + b)).ln();
    }
    if t.abs() * b <= 0.5 {
        // M'(t) = Σ_{j≥0} m_{j+1} t^j / j!, m_n = Σ_{i≤n} a^i b^{n-i} / (n+1)
        let mut power_sum = a + b; // Σ a^i b^{1-i}, n = 1
        let mut term_t = 1.0; // t^j / j!
        let mut sum = 0.0;
        for j in 0..40u32 {
            let m = power_sum / (j as f64 + 2.0);
            sum += m * term_t;
            term_t *= t / (j as f64 + 1.0);
            power_sum = power_sum * b + a.powi(j as i32 + 2);
            if (m * term_t).abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum.ln();
    }
    let width = b - a;
    if t < 0.0 {
        let u = t * width;
        let bracket = (1.0 - a * t) * (-u.exp_m1()) + u * u.exp();
        t * a + bracket.ln() - (t * t * width).ln()
    } else {
        let v = t * width;
        let bracket = v * (-v).exp() - (1.0 - b * t) * (-(-v).exp_m1());
        t * b + bracket.ln() - (t * t * width).ln()
    }
}

/// Inverse-CDF sampling on the truncated interval, with rejection fallbacks
/// once the standardized bounds leave the range where Φ is resolvable.
fn sample_trunc_gauss<R: Rng + ?Sized>(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let alpha = (lo - mu) / sigma;
    let beta = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        (hi - mu) / sigma
    };
    let z = if alpha >= 6.0 {
        sample_std_tail(alpha, beta, rng)
    } else if beta <= -6.0 {
        -sample_std_tail(-beta, -alpha, rng)
    } else {
        let pa = norm_cdf(alpha);
        let pb = if beta == f64::INFINITY {
            1.0
        } else {
            norm_cdf(beta)
        };
        loop {
            let p = pa + rng.random::<f64>() * (pb - pa);
            if p > 0.0 && p < 1.0 {
                break inv_norm_cdf(p).clamp(alpha, beta);
            }
        }
    };
    (mu + sigma * z).clamp(lo, hi)
}

/// Standard normal conditioned on [a, b] for a ≥ 6.
fn sample_std_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b.is_finite() && (b - a) * a < 0.5 {
        // thin band: uniform proposal, density bound at the left edge
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            let accept = (-0.5 * (z - a) * (z + a)).exp();
            if rng.random::<f64>() <= accept {
                return z;
            }
        }
    }
    // Robert's shifted-exponential proposal with rate a
    loop {
        let u: f64 = rng.random();
        let z = a - (1.0 - u).ln() / a;
        if z > b {
            continue;
        }
        let d = z - a;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// One weighted term of a linear combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub family: BaseFamily,
}

/// A non-negative linear combination 1/b = Σ aᵢxᵢ of base families.
///
/// Immutable after construction; construction enforces the support and
/// coefficient invariants, so evaluation never fails. Deserialization goes
/// through the same validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
struct SpecWire {
    terms: Vec<Term>,
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SpecWire {
            terms: self.terms.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = SpecWire::deserialize(d)?;
        DistributionSpec::new(raw.terms).map_err(D::Error::custom)
    }
}

impl DistributionSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self, SpecError> {
        if terms.is_empty() {
            return Err(SpecError::NoTerms);
        }
        for (index, term) in terms.iter().enumerate() {
            if !(term.coef >= 0.0 && term.coef.is_finite()) {
                return Err(SpecError::BadCoefficient {
                    index,
                    value: term.coef,
                });
            }
            term.family.validate()?;
        }
        if !terms.iter().any(|t| t.coef > 0.0) {
            return Err(SpecError::AllCoefficientsZero);
        }
        Ok(DistributionSpec { terms })
    }

    /// Single family with unit coefficient.
    pub fn single(family: BaseFamily) -> Result<Self, SpecError> {
        Self::new(vec![Term { coef: 1.0, family }])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn from_json(json: &str) -> Result<Self, SpecError> {
        serde_json::from_str(json).map_err(|e| SpecError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialization cannot fail")
    }

    /// ln M_{1/b}(t); +∞ when any factor diverges.
    pub fn ln_mgf(&self, t: f64) -> f64 {
        let mut sum = 0.0;
        for term in self.terms() {
            if term.coef == 0.0 {
                continue;
            }
            let l = term.family.ln_mgf(term.coef * t);
            if l == f64::INFINITY {
                return f64::INFINITY;
            }
            sum += l;
        }
        sum
    }

    /// M_{1/b}(t) = Π M_{xᵢ}(aᵢt); +∞ when the MGF does not exist at t.
    pub fn mgf(&self, t: f64) -> f64 {
        self.ln_mgf(t).exp()
    }

    pub fn mgf_exists(&self, t: f64) -> bool {
        self.ln_mgf(t) < f64::INFINITY
    }

    /// ln M'_{1/b}(t), expanded by the product rule across terms.
    pub fn ln_mgf_deriv(&self, t: f64) -> f64 {
        let terms = self.terms();
        let mut ln_factors = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        for term in terms {
            if term.coef == 0.0 {
                ln_factors.push(0.0);
                continue;
            }
            let l = term.family.ln_mgf(term.coef * t);
            if l == f64::INFINITY {
                return f64::INFINITY;
            }
            ln_factors.push(l);
            total += l;
        }
        let contributions: Vec<f64> = terms
            .iter()
            .zip(&ln_factors)
            .map(|(term, lf)| {
                if term.coef == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    term.coef.ln() + term.family.ln_mgf_deriv(term.coef * t) + total - lf
                }
            })
            .collect();
        log_sum_exp(&contributions)
    }

    /// d/dt M_{1/b}(t).
    pub fn mgf_deriv(&self, t: f64) -> f64 {
        self.ln_mgf_deriv(t).exp()
    }

    /// E[1/b] = Σ aᵢ E[xᵢ].
    pub fn mean_inv_b(&self) -> f64 {
        self.terms()
            .iter()
            .map(|t| t.coef * t.family.mean())
            .sum()
    }

    /// One strictly positive draw of Σ aᵢxᵢ.
    pub fn sample_inv_b<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let draw: f64 = self
                .terms()
                .iter()
                .map(|t| {
                    if t.coef == 0.0 {
                        0.0
                    } else {
                        t.coef * t.family.sample(rng)
                    }
                })
                .sum();
            if draw > 0.0 {
                return draw;
            }
        }
    }

    /// Terse one-line rendering for CSV columns and logs.
    pub fn compact_string(&self) -> String {
        self.terms()
            .iter()
            .filter(|t| t.coef > 0.0)
            .map(|t| {
                let fam = match t.family {
                    BaseFamily::Degenerate { k0 } => format!("degenerate(k0={k0:.6})"),
                    BaseFamily::Bernoulli { p, x0, x1 } => {
                        format!("bernoulli(p={p:.6} x0={x0:.6} x1={x1:.6})")
                    }
                    BaseFamily::Gamma { k, theta } => format!("gamma(k={k:.6} theta={theta:.6})"),
                    BaseFamily::Uniform { a, b } => format!("uniform(a={a:.6} b={b:.6})"),
                    BaseFamily::TruncGauss { mu, sigma, lo, hi } => format!(
                        "trunc_gauss(mu={mu:.6} sigma={sigma:.6} lo={lo:.6} hi={})",
                        match hi {
                            TailBound::Finite(h) => format!("{h:.6}"),
                            TailBound::Inf => "inf".to_string(),
                        }
                    ),
                };
                format!("{:.6}*{}", t.coef, fam)
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl std::fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.compact_string())
    }
}
