//! Checkers for the trajectory-aware and state-dependent generalizations of
//! the weak recency condition.
//!
//! Both checkers certify only the traces or tables handed to them; a
//! universal claim over histories needs every relevant trace checked.

use crate::error::{Error, Result};
use crate::mrp::Trajectory;
use crate::weights::TdWeights;

/// Realized weights `h_i` along one trajectory together with the ratios
/// `rho[i] = ρ_{t+i+1}` that pair `h_i` with `h_{i+1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OffPolicyTrace {
    h_values: Vec<f64>,
    rho: Vec<f64>,
}

impl OffPolicyTrace {
    /// `rho` may be as long as `h_values` or one shorter; a trailing ratio
    /// has no following weight to constrain.
    pub fn new(h_values: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if rho.len() > h_values.len() || rho.len() + 1 < h_values.len() {
            return Err(Error::SizeMismatch {
                expected: h_values.len().saturating_sub(1),
                got: rho.len(),
            });
        }
        if let Some(h) = h_values.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {h} is not finite")));
        }
        if let Some(r) = rho.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "ratio {r} must be finite and nonnegative"
            )));
        }
        Ok(Self { h_values, rho })
    }

    /// All ratios equal to one.
    pub fn on_policy(h_values: Vec<f64>) -> Self {
        let rho = vec![1.0; h_values.len().saturating_sub(1)];
        Self { h_values, rho }
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.h_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_values.is_empty()
    }

    /// Reads lines of `h rho`; the last line may carry `h` alone. Blank
    /// lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut h = Vec::new();
        let mut rho = Vec::new();
        let mut open = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if open {
                return Err(Error::Parse(format!(
                    "line {}: only the last line may omit rho",
                    lineno + 1
                )));
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {f}: {e}", lineno + 1)))
                })
                .collect::<Result<_>>()?;
            match fields[..] {
                [hv, r] => {
                    h.push(hv);
                    rho.push(r);
                }
                [hv] => {
                    h.push(hv);
                    open = true;
                }
                _ => return Err(Error::Parse(format!("line {}: expected `h rho`", lineno + 1))),
            }
        }
        Self::new(h, rho)
    }
}

/// Smallest `i` at which `h_i ρ_{i+1} ≥ h_{i+1} - eps` or
/// `h_{i+1} ≥ -eps` fails, with index 0 also covering `h_0 ≥ -eps`.
/// `None` means the trace satisfies the condition.
pub fn check_offpolicy_condition(trace: &OffPolicyTrace, eps: f64) -> Option<usize> {
    let h = trace.h_values();
    if h.first().is_some_and(|&h0| h0 < -eps) {
        return Some(0);
    }
    (0..h.len().saturating_sub(1)).find(|&i| h[i] * trace.rho[i] < h[i + 1] - eps || h[i + 1] < -eps)
}

/// Per-step tables of state-dependent weights `h_i(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateWeights {
    tables: Vec<Vec<f64>>,
}

/// Location of a state-dependent recency failure: `h_step(from)` falls
/// below `h_{step+1}(to)`, or is negative when `from == to` and the step
/// is the one holding the negative entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateViolation {
    pub step: usize,
    pub from: usize,
    pub to: usize,
}

impl StateWeights {
    pub fn new(tables: Vec<Vec<f64>>, n_states: usize) -> Result<Self> {
        for t in &tables {
            if t.len() != n_states {
                return Err(Error::SizeMismatch {
                    expected: n_states,
                    got: t.len(),
                });
            }
            if let Some(x) = t.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight {x} is not finite")));
            }
        }
        Ok(Self { tables })
    }

    /// The same weights `h_i` in every state.
    pub fn uniform(h: &[f64], n_states: usize) -> Self {
        Self {
            tables: h.iter().map(|&x| vec![x; n_states]).collect(),
        }
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }
}

fn argmin(xs: &[f64]) -> Option<(usize, f64)> {
    xs.iter().copied().enumerate().fold(None, |best, (i, x)| match best {
        Some((_, b)) if b <= x => best,
        _ => Some((i, x)),
    })
}

fn argmax(xs: &[f64]) -> Option<(usize, f64)> {
    xs.iter().copied().enumerate().fold(None, |best, (i, x)| match best {
        Some((_, b)) if b >= x => best,
        _ => Some((i, x)),
    })
}

/// First failure of `h_i(s) ≥ h_{i+1}(s') - eps` for all `s, s'`, or of
/// `h_i(s) ≥ -eps`, scanning steps in order.
pub fn check_state_dependent_recency(w: &StateWeights, eps: f64) -> Option<StateViolation> {
    let tables = w.tables();
    for (step, table) in tables.iter().enumerate() {
        if let Some(s) = table.iter().position(|&x| x < -eps) {
            return Some(StateViolation { step, from: s, to: s });
        }
        let Some(next) = tables.get(step + 1) else { break };
        if let (Some((from, lo)), Some((to, hi))) = (argmin(table), argmax(next)) {
            if lo < hi - eps {
                return Some(StateViolation { step, from, to });
            }
        }
    }
    None
}

/// A history-dependent weighting rule: `h_0` and the map from `h_i` to
/// `h_{i+1}` given the ratio `ρ_{t+i+1}` and the states visited so far.
pub trait TraceRule {
    fn initial(&self) -> f64 {
        1.0
    }

    fn next(&self, i: usize, h: f64, rho: f64, history: &[usize]) -> f64;
}

/// `h_{i+1} = h_i λ min(1, ρ_{t+i+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrace {
    pub lambda: f64,
}

impl TraceRule for Retrace {
    fn next(&self, _: usize, h: f64, rho: f64, _: &[usize]) -> f64 {
        h * self.lambda * rho.min(1.0)
    }
}

/// `h_{i+1} = h_i λ ρ_{t+i+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceSampling {
    pub lambda: f64,
}

impl TraceRule for ImportanceSampling {
    fn next(&self, _: usize, h: f64, rho: f64, _: &[usize]) -> f64 {
        h * self.lambda * rho
    }
}

/// History-independent weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixed(pub TdWeights);

impl TraceRule for Fixed {
    fn initial(&self) -> f64 {
        self.0.get(0)
    }

    fn next(&self, i: usize, _: f64, _: f64, _: &[usize]) -> f64 {
        self.0.get(i + 1)
    }
}

/// Applies `rule` along `traj`. `behavior[i]` and `target[i]` are the
/// probabilities of the action taken at step `i + 1`, so at most
/// `traj.len()` of them fit; the result has one more weight than ratios.
pub fn realize_trace(
    rule: &dyn TraceRule,
    traj: &Trajectory,
    behavior: &[f64],
    target: &[f64],
) -> Result<OffPolicyTrace> {
    if behavior.len() != target.len() {
        return Err(Error::SizeMismatch {
            expected: behavior.len(),
            got: target.len(),
        });
    }
    if behavior.len() > traj.len() {
        return Err(Error::SizeMismatch {
            expected: traj.len(),
            got: behavior.len(),
        });
    }
    let mut rho = Vec::with_capacity(behavior.len());
    for (i, (&b, &p)) in behavior.iter().zip(target).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability(p));
        }
        if b == 0.0 {
            return Err(Error::ZeroBehaviorProbability(i));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::BadProbability(b));
        }
        rho.push(p / b);
    }
    let mut h = Vec::with_capacity(rho.len() + 1);
    h.push(rule.initial());
    for (i, &r) in rho.iter().enumerate() {
        let prev = h[i];
        h.push(rule.next(i, prev, r, &traj.states()[..i + 2]));
    }
    OffPolicyTrace::new(h, rho)
}
