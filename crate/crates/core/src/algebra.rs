//! Hierarchy classification, recency checks, contraction moduli and the
//! variance bound for linear return estimators.
//!
//! Every boolean is decided with an explicit comparison tolerance `eps`
//! ([`DEFAULT_EPSILON`] unless the caller says otherwise). The recency
//! checks read the TD-error weights directly; the hierarchy flags read the
//! n-step weights. The two meet only through the property tests.

use crate::error::Result;
use crate::weights::{h_to_c, NStepWeights, Tail, TdWeights};

pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub is_linear: bool,
    pub is_affine: bool,
    pub is_convex: bool,
    pub is_compound: bool,
    pub is_nstep: bool,
    pub weak_recency: bool,
    pub strong_recency: bool,
    /// `Σ c_n`.
    pub weight_sum: f64,
    /// `|1 - Σ c_n| + Σ |c_n| γ^n`.
    pub modulus: f64,
}

impl Classification {
    /// Most specific level of the hierarchy.
    pub fn level(&self) -> &'static str {
        if self.is_nstep {
            "n-step"
        } else if self.is_compound {
            "compound"
        } else if self.is_convex {
            "convex"
        } else if self.is_affine {
            "affine"
        } else {
            "linear"
        }
    }
}

/// Worst-case max-norm contraction modulus of the operator with n-step
/// weights `c`.
pub fn contraction_modulus(c: &NStepWeights, discount: f64) -> f64 {
    (1.0 - c.sum()).abs() + c.discounted_abs_sum(discount)
}

/// Worst-case conditional variance bound `((1 - β) / (1 - γ))² κ` for a
/// convex return with modulus `β`.
pub fn variance_bound(modulus: f64, discount: f64, kappa: f64) -> f64 {
    ((1.0 - modulus) / (1.0 - discount)).powi(2) * kappa
}

/// `h_i ≥ h_{i+1} - eps` and `h_i ≥ -eps` for every `i`.
pub fn weak_recency(h: &TdWeights, eps: f64) -> bool {
    let seq = h.seq();
    if seq.representative_entries().any(|x| x < -eps) {
        return false;
    }
    let l = seq.prefix().len();
    if (0..l).any(|i| seq.get(i) < seq.get(i + 1) - eps) {
        return false;
    }
    match seq.tail() {
        Tail::Zero => true,
        Tail::Geometric { ratio, pattern } => {
            // ratio^k ≤ 1 scales every later period, so the first one decides.
            let m = pattern.len();
            pattern.windows(2).all(|w| w[0] >= w[1] - eps) && pattern[m - 1] >= ratio * pattern[0] - eps
        }
    }
}

/// `h_i - h_{i+1} > eps` and `h_{i+1} > eps` for every `i`. A zero tail
/// always fails; a geometric tail must have coefficients above `eps`, a
/// ratio inside `(eps, 1 - eps)` and strictly decreasing periods.
pub fn strong_recency(h: &TdWeights, eps: f64) -> bool {
    let seq = h.seq();
    let l = seq.prefix().len();
    for i in 0..l {
        let (a, b) = (seq.get(i), seq.get(i + 1));
        if a - b <= eps || b <= eps {
            return false;
        }
    }
    match seq.tail() {
        Tail::Zero => false,
        Tail::Geometric { ratio, pattern } => {
            let m = pattern.len();
            let ratio_ok = *ratio > eps && *ratio < 1.0 - eps;
            let positive = pattern.iter().all(|&p| p > eps);
            let decreasing =
                pattern.windows(2).all(|w| w[0] - w[1] > eps) && (m == 1 || pattern[m - 1] - ratio * pattern[0] > eps);
            ratio_ok && positive && decreasing
        }
    }
}

/// Places the estimator with TD-error weights `h` in the
/// linear/affine/convex/compound/n-step hierarchy.
pub fn classify(h: &TdWeights, discount: f64, eps: f64) -> Result<Classification> {
    let c = h_to_c(h)?;
    let weight_sum = c.sum();
    let modulus = contraction_modulus(&c, discount);
    let is_affine = (weight_sum - 1.0).abs() <= eps && modulus < 1.0;
    let is_convex = is_affine && c.seq().representative_entries().all(|x| x >= -eps);
    let is_compound = is_convex && positive_weight_count(&c, eps) >= 2;
    Ok(Classification {
        is_linear: true,
        is_affine,
        is_convex,
        is_compound,
        is_nstep: is_single_nstep(&c, eps),
        weak_recency: weak_recency(h, eps),
        strong_recency: strong_recency(h, eps),
        weight_sum,
        modulus,
    })
}

/// Number of weights above `eps`, saturating at 2.
fn positive_weight_count(c: &NStepWeights, eps: f64) -> usize {
    let seq = c.seq();
    let mut count = seq.prefix().iter().filter(|&&x| x > eps).count();
    if let Tail::Geometric { ratio, pattern } = seq.tail() {
        for &p in pattern {
            if p > eps {
                count += if p * ratio > eps { 2 } else { 1 };
            }
        }
    }
    count.min(2)
}

fn is_single_nstep(c: &NStepWeights, eps: f64) -> bool {
    let seq = c.seq();
    if let Tail::Geometric { ratio, pattern } = seq.tail() {
        if pattern.iter().any(|p| p.abs() * ratio > eps) {
            return false;
        }
    }
    let mut ones = 0;
    for x in seq.representative_entries() {
        if (x - 1.0).abs() <= eps {
            ones += 1;
        } else if x.abs() > eps {
            return false;
        }
    }
    ones == 1
}
