//! Log-domain arithmetic helpers.
//!
//! Mixture MGFs and privacy bounds are evaluated as log-sum-exps so that
//! terms like e^{Δq/b} stay representable far past the f64 overflow point.

/// log(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a.is_infinite() || b.is_infinite() {
        return f64::INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ e^{x_i}. Empty input yields -∞; any +∞ term dominates.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x == f64::INFINITY {
            return f64::INFINITY;
        }
        if x > m {
            m = x;
        }
    }
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// log(1 - e^d) for d ≤ 0, stable near both endpoints.
pub fn ln_one_minus_exp(d: f64) -> f64 {
    debug_assert!(d <= 0.0);
    if d == 0.0 {
        return f64::NEG_INFINITY;
    }
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}
