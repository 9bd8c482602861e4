//! Real weight sequences with a finite prefix and an analytic tail.
//!
//! The tail is periodic-geometric: past the prefix, offset `j` holds
//! `pattern[j % m] * ratio^(j / m)` with `m = pattern.len()`. A plain
//! geometric tail is the case `m = 1`. The family is closed under
//! first differences and under tail sums, so TD-error weights and n-step
//! weights of every supported estimator convert into each other exactly,
//! and all sums used by the contraction analysis have closed forms.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Zero,
    Geometric { ratio: f64, pattern: Vec<f64> },
}

impl Tail {
    /// `coefficient * ratio^j`.
    pub fn geometric(ratio: f64, coefficient: f64) -> Self {
        Tail::Geometric {
            ratio,
            pattern: vec![coefficient],
        }
    }

    /// `pattern[j % m] * ratio^(j / m)`.
    pub fn periodic(ratio: f64, pattern: Vec<f64>) -> Self {
        Tail::Geometric { ratio, pattern }
    }

    fn at(&self, j: usize) -> f64 {
        match self {
            Tail::Zero => 0.0,
            Tail::Geometric { ratio, pattern } => {
                let m = pattern.len();
                pattern[j % m] * pow(*ratio, j / m)
            }
        }
    }
}

/// `base^k` with `0^0 = 1`.
pub(crate) fn pow(base: f64, k: usize) -> f64 {
    match i32::try_from(k) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(k as f64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSeq {
    prefix: Vec<f64>,
    tail: Tail,
}

impl WeightSeq {
    /// Ratios must lie in `[0, 1]`. A ratio of exactly 1 describes a tail
    /// that does not vanish (e.g. Monte-Carlo TD-error weights); such
    /// sequences can be evaluated entrywise and under discounting, but have
    /// no finite plain sum.
    pub fn new(prefix: Vec<f64>, tail: Tail) -> Result<Self> {
        if prefix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        if let Tail::Geometric { ratio, pattern } = &tail {
            if !(0.0..=1.0).contains(ratio) {
                return Err(Error::UnsupportedTail(*ratio));
            }
            if pattern.is_empty() || pattern.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "tail pattern must be nonempty and finite".into(),
                ));
            }
        }
        Ok(Self { prefix, tail })
    }

    /// Finitely supported sequence.
    pub fn finite(prefix: Vec<f64>) -> Self {
        Self {
            prefix,
            tail: Tail::Zero,
        }
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.prefix.get(i) {
            Some(&x) => x,
            None => self.tail.at(i - self.prefix.len()),
        }
    }

    /// First `len` entries.
    pub fn head(&self, len: usize) -> Vec<f64> {
        (0..len).map(|i| self.get(i)).collect()
    }

    /// Index past which every entry is zero, if any.
    pub fn support_end(&self) -> Option<usize> {
        match &self.tail {
            Tail::Zero => Some(self.prefix.len()),
            Tail::Geometric { pattern, .. } if pattern.iter().all(|&p| p == 0.0) => Some(self.prefix.len()),
            Tail::Geometric { ratio, pattern } if *ratio == 0.0 => Some(self.prefix.len() + pattern.len()),
            _ => None,
        }
    }

    /// True when entries tend to zero.
    pub fn vanishes(&self) -> bool {
        match &self.tail {
            Tail::Zero => true,
            Tail::Geometric { ratio, pattern } => *ratio < 1.0 || pattern.iter().all(|&p| p == 0.0),
        }
    }

    /// Entries whose signs and ordering determine those of the whole
    /// sequence: the prefix followed by the first period of the tail.
    pub fn representative_entries(&self) -> impl Iterator<Item = f64> + '_ {
        let pattern: &[f64] = match &self.tail {
            Tail::Zero => &[],
            Tail::Geometric { pattern, .. } => pattern,
        };
        self.prefix.iter().chain(pattern).copied()
    }

    /// `Σ w_i`. Not finite when the tail does not vanish.
    pub fn sum(&self) -> f64 {
        let head: f64 = self.prefix.iter().sum();
        head + match &self.tail {
            Tail::Zero => 0.0,
            Tail::Geometric { ratio, pattern } => {
                let s: f64 = pattern.iter().sum();
                if s == 0.0 {
                    0.0
                } else {
                    s / (1.0 - ratio)
                }
            }
        }
    }

    /// `Σ w_i γ^i` for `γ ∈ [0, 1)`.
    pub fn discounted_sum(&self, discount: f64) -> f64 {
        self.discounted_with(discount, |x| x)
    }

    /// `Σ |w_i| γ^i` for `γ ∈ [0, 1)`. Exact because `ratio ≥ 0` keeps the
    /// sign of each tail entry equal to the sign of its pattern slot.
    pub fn discounted_abs_sum(&self, discount: f64) -> f64 {
        self.discounted_with(discount, f64::abs)
    }

    fn discounted_with(&self, discount: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut g = 1.0;
        for &x in &self.prefix {
            acc += f(x) * g;
            g *= discount;
        }
        if let Tail::Geometric { ratio, pattern } = &self.tail {
            let m = pattern.len();
            let mut period = 0.0;
            let mut gr = 1.0;
            for &p in pattern {
                period += f(p) * gr;
                gr *= discount;
            }
            if period != 0.0 {
                acc += g * period / (1.0 - ratio * pow(discount, m));
            }
        }
        acc
    }

    /// `d_i = w_i - w_{i+1}`.
    pub fn differences(&self) -> WeightSeq {
        let l = self.prefix.len();
        let prefix = (0..l).map(|i| self.prefix[i] - self.get(i + 1)).collect();
        let tail = match &self.tail {
            Tail::Zero => Tail::Zero,
            Tail::Geometric { ratio, pattern } => {
                let m = pattern.len();
                let diff = (0..m)
                    .map(|r| {
                        if r + 1 < m {
                            pattern[r] - pattern[r + 1]
                        } else {
                            pattern[r] - ratio * pattern[0]
                        }
                    })
                    .collect();
                Tail::Geometric {
                    ratio: *ratio,
                    pattern: diff,
                }
            }
        };
        WeightSeq { prefix, tail }
    }

    /// `S_i = Σ_{j ≥ i} w_j`. Fails when the tail does not vanish.
    pub fn tail_sums(&self) -> Result<WeightSeq> {
        if !self.vanishes() {
            return Err(Error::NonVanishingTail);
        }
        let (tail_total, tail) = match &self.tail {
            Tail::Zero => (0.0, Tail::Zero),
            Tail::Geometric { ratio, pattern } => {
                let total: f64 = pattern.iter().sum::<f64>() / (1.0 - ratio);
                let beyond = ratio * total;
                let mut sums = vec![0.0; pattern.len()];
                let mut run = beyond;
                for r in (0..pattern.len()).rev() {
                    run += pattern[r];
                    sums[r] = run;
                }
                (
                    total,
                    Tail::Geometric {
                        ratio: *ratio,
                        pattern: sums,
                    },
                )
            }
        };
        let mut prefix = vec![0.0; self.prefix.len()];
        let mut run = tail_total;
        for i in (0..self.prefix.len()).rev() {
            run += self.prefix[i];
            prefix[i] = run;
        }
        Ok(WeightSeq { prefix, tail })
    }
}

/// TD-error weights `(h_i)_{i ≥ 0}`: `h_i` scales the discounted TD error
/// observed `i` steps after the updated state.
#[derive(Debug, Clone, PartialEq)]
pub struct TdWeights(WeightSeq);

impl TdWeights {
    pub fn new(seq: WeightSeq) -> Self {
        Self(seq)
    }

    pub fn seq(&self) -> &WeightSeq {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i)
    }
}

/// n-step weights `(c_n)_{n ≥ 1}`. Entry `j` of the underlying sequence
/// holds `c_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NStepWeights(WeightSeq);

impl NStepWeights {
    pub fn new(seq: WeightSeq) -> Self {
        Self(seq)
    }

    /// Builds from `c_1, c_2, …` with a zero tail.
    pub fn finite(c: Vec<f64>) -> Self {
        Self(WeightSeq::finite(c))
    }

    pub fn seq(&self) -> &WeightSeq {
        &self.0
    }

    /// `c_n`; zero for `n = 0`.
    pub fn get(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.0.get(n - 1)
        }
    }

    /// `Σ c_n`.
    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    /// `Σ |c_n| γ^n`.
    pub fn discounted_abs_sum(&self, discount: f64) -> f64 {
        discount * self.0.discounted_abs_sum(discount)
    }

    /// `Σ c_n γ^n`.
    pub fn discounted_sum(&self, discount: f64) -> f64 {
        discount * self.0.discounted_sum(discount)
    }
}

/// `c_n = h_{n-1} - h_n`.
pub fn h_to_c(h: &TdWeights) -> Result<NStepWeights> {
    if !h.0.vanishes() {
        return Err(Error::NonVanishingTail);
    }
    Ok(NStepWeights(h.0.differences()))
}

/// `h_i = Σ_{n > i} c_n`.
pub fn c_to_h(c: &NStepWeights) -> Result<TdWeights> {
    Ok(TdWeights(c.0.tail_sums()?))
}
