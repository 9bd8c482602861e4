//! Sampled TD learning on single episodes: TD errors, general forward-view
//! targets, offline backups and the backward view with eligibility traces.

use crate::error::{Error, Result};
use crate::mrp::{Trajectory, ValueFunction};
use crate::weights::{pow, Tail, TdWeights};

fn value_after(traj: &Trajectory, v: &[f64], t: usize) -> f64 {
    // The state reached by the last step of a terminated episode is terminal.
    if t == traj.len() && traj.terminated() {
        0.0
    } else {
        v[traj.states()[t]]
    }
}

fn check_values(traj: &Trajectory, v: &[f64]) -> Result<()> {
    match traj.states().iter().find(|&&s| s >= v.len()) {
        Some(&s) => Err(Error::StateOutOfRange(s)),
        None => Ok(()),
    }
}

/// `δ_t = R_t + γ V_{t+1} - V_t` for `t < T`.
pub fn td_errors(traj: &Trajectory, v: &ValueFunction, discount: f64) -> Result<Vec<f64>> {
    check_values(traj, v)?;
    Ok((0..traj.len())
        .map(|t| traj.rewards()[t] + discount * value_after(traj, v, t + 1) - v[traj.states()[t]])
        .collect())
}

/// `V_t + Σ_i h_i γ^i δ_{t+i}` with TD errors past the end of the
/// episode taken as zero.
pub fn forward_target(traj: &Trajectory, t: usize, h: &TdWeights, v: &ValueFunction, discount: f64) -> Result<f64> {
    if t >= traj.len() {
        return Err(Error::TimeOutOfRange { t, len: traj.len() });
    }
    let deltas = td_errors(traj, v, discount)?;
    let mut g = 1.0;
    let mut acc = 0.0;
    for (i, d) in deltas[t..].iter().enumerate() {
        acc += h.get(i) * g * d;
        g *= discount;
    }
    Ok(v[traj.states()[t]] + acc)
}

/// `Σ_i h_i γ^i δ_{t+i}` for every `t`, in `O(T (L + m))` for a prefix of
/// length `L` and a tail period `m`.
pub fn weighted_error_sums(deltas: &[f64], h: &TdWeights, discount: f64) -> Vec<f64> {
    let n = deltas.len();
    let seq = h.seq();
    let prefix = seq.prefix();
    let mut out = vec![0.0; n];
    for (t, o) in out.iter_mut().enumerate() {
        let mut g = 1.0;
        for (i, &hi) in prefix.iter().enumerate().take(n - t) {
            *o += hi * g * deltas[t + i];
            g *= discount;
        }
    }
    if let Tail::Geometric { ratio, pattern } = seq.tail() {
        let l = prefix.len();
        let m = pattern.len();
        // u[s] = Σ_k (ρ γ^m)^k δ_{s + k m}
        let step = ratio * pow(discount, m);
        let mut u = vec![0.0; n];
        for s in (0..n).rev() {
            u[s] = deltas[s] + if s + m < n { step * u[s + m] } else { 0.0 };
        }
        for (t, o) in out.iter_mut().enumerate() {
            let mut g = pow(discount, l);
            for (r, &p) in pattern.iter().enumerate() {
                let s = t + l + r;
                if s >= n {
                    break;
                }
                *o += p * g * u[s];
                g *= discount;
            }
        }
    }
    out
}

/// Forward-view offline backup: every target is computed from `v` as it
/// stood at the start of the episode, and increments for repeated visits
/// add up.
pub fn offline_episode_backup(
    traj: &Trajectory,
    v: &ValueFunction,
    h: &TdWeights,
    discount: f64,
    alpha: f64,
) -> Result<ValueFunction> {
    check_alpha(alpha)?;
    let deltas = td_errors(traj, v, discount)?;
    let errors = weighted_error_sums(&deltas, h, discount);
    let mut out = v.clone();
    for (t, e) in errors.iter().enumerate() {
        out.as_mut_slice()[traj.states()[t]] += alpha * e;
    }
    Ok(out)
}

/// Offline backup applied one experience at a time: targets are computed
/// from `v` as it stood at the start of the episode, then for `t = 0, 1, …`
/// the entry for `S_t` moves a fraction `α` of the way to its target.
/// Repeated visits therefore blend instead of adding up.
pub fn sequential_episode_backup(
    traj: &Trajectory,
    v: &ValueFunction,
    h: &TdWeights,
    discount: f64,
    alpha: f64,
) -> Result<ValueFunction> {
    check_alpha(alpha)?;
    let deltas = td_errors(traj, v, discount)?;
    let errors = weighted_error_sums(&deltas, h, discount);
    let mut out = v.clone();
    for (t, e) in errors.iter().enumerate() {
        let s = traj.states()[t];
        let target = v[s] + e;
        let cur = &mut out.as_mut_slice()[s];
        *cur += alpha * (target - *cur);
    }
    Ok(out)
}

/// Accumulating eligibility traces: every step decays all traces by `γλ`
/// and then bumps the visited state by one.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatingTrace {
    z: Vec<f64>,
    decay: f64,
}

impl AccumulatingTrace {
    pub fn new(n_states: usize, decay: f64) -> Self {
        Self {
            z: vec![0.0; n_states],
            decay,
        }
    }

    pub fn visit(&mut self, s: usize) {
        for z in &mut self.z {
            *z *= self.decay;
        }
        self.z[s] += 1.0;
    }

    pub fn get(&self, s: usize) -> f64 {
        self.z[s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }
}

/// Backward-view TD(λ) with the value function held fixed over the
/// episode and the accumulated increments applied once at the end.
pub fn backward_tdlambda_offline(
    traj: &Trajectory,
    v: &ValueFunction,
    lambda: f64,
    discount: f64,
    alpha: f64,
) -> Result<ValueFunction> {
    check_alpha(alpha)?;
    let deltas = td_errors(traj, v, discount)?;
    let mut trace = AccumulatingTrace::new(v.len(), discount * lambda);
    let mut increments = vec![0.0; v.len()];
    for (t, d) in deltas.iter().enumerate() {
        trace.visit(traj.states()[t]);
        for (inc, z) in increments.iter_mut().zip(trace.as_slice()) {
            *inc += alpha * d * z;
        }
    }
    Ok(ValueFunction::new(
        v.iter().zip(&increments).map(|(a, b)| a + b).collect(),
    ))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size {alpha} outside [0, 1]")))
    }
}
