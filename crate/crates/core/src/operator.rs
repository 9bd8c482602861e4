//! Exact expected-update dynamics of linear return estimators.
//!
//! Two evaluation routes are provided for the same operator:
//! [`apply_operator`] sums discounted expected TD errors weighted by `h`,
//! [`apply_operator_nstep_form`] mixes n-step Bellman operators weighted
//! by `c`. Geometric tails are summed in closed form with one linear solve
//! per call.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::mrp::{to_values, Mrp, ValueFunction};
use crate::rng;
use crate::weights::{NStepWeights, Tail, TdWeights};

/// `Σ_r p_r A^r (I - ρ A^m)^{-1} x` with `A = γP` and `m = pattern.len()`,
/// i.e. `Σ_{k ≥ 0} Σ_r p_r ρ^k A^{km + r} x`.
fn periodic_tail_sum(mrp: &Mrp, ratio: f64, pattern: &[f64], x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = mrp.n_states();
    if pattern.iter().all(|&p| p == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let a = mrp.transition() * mrp.discount();
    let y = if ratio == 0.0 {
        x.clone()
    } else {
        let mut a_m = DMatrix::identity(n, n);
        for _ in 0..pattern.len() {
            a_m = &a * a_m;
        }
        let system = DMatrix::identity(n, n) - a_m * ratio;
        system.lu().solve(x).ok_or(Error::SingularSystem)?
    };
    let mut out = DVector::zeros(n);
    let mut z = y;
    for (r, &p) in pattern.iter().enumerate() {
        if p != 0.0 {
            out += &z * p;
        }
        if r + 1 < pattern.len() {
            z = &a * z;
        }
    }
    Ok(out)
}

/// `H v = v + Σ_i h_i (γP)^i (T v - v)`.
pub fn apply_operator(mrp: &Mrp, h: &TdWeights, v: &ValueFunction) -> Result<ValueFunction> {
    let v = mrp.masked(v)?;
    Ok(to_values(apply_vec(mrp, h, &v)?))
}

pub(crate) fn apply_vec(mrp: &Mrp, h: &TdWeights, v: &DVector<f64>) -> Result<DVector<f64>> {
    let seq = h.seq();
    let mut acc = v.clone();
    let mut x = mrp.bellman_vec(v) - v;
    for &hi in seq.prefix() {
        if hi != 0.0 {
            acc += &x * hi;
        }
        x = mrp.discounted_step(&x);
    }
    if let Tail::Geometric { ratio, pattern } = seq.tail() {
        acc += periodic_tail_sum(mrp, *ratio, pattern, &x)?;
    }
    Ok(acc)
}

/// `H v = (1 - Σ c_n) v + Σ_n c_n T^n v`.
///
/// The prefix is applied by repeated Bellman backups. For the geometric
/// tail, `T^n v = v_π + (γP)^n (v - v_π)` turns the infinite mixture into
/// one closed-form sum.
pub fn apply_operator_nstep_form(mrp: &Mrp, c: &NStepWeights, v: &ValueFunction) -> Result<ValueFunction> {
    let v = mrp.masked(v)?;
    let seq = c.seq();
    let mut acc = &v * (1.0 - c.sum());
    let mut w = v.clone();
    for &cn in seq.prefix() {
        w = mrp.bellman_vec(&w);
        if cn != 0.0 {
            acc += &w * cn;
        }
    }
    if let Tail::Geometric { ratio, pattern } = seq.tail() {
        if pattern.iter().any(|&p| p != 0.0) {
            if *ratio >= 1.0 {
                return Err(Error::UnsupportedTail(*ratio));
            }
            let v_pi = mrp.masked(&mrp.exact_values()?)?;
            // First tail weight is c_{L+1}.
            let mut e = &v - &v_pi;
            for _ in 0..=seq.prefix().len() {
                e = mrp.discounted_step(&e);
            }
            let mass: f64 = pattern.iter().sum::<f64>() / (1.0 - ratio);
            acc += &v_pi * mass;
            acc += periodic_tail_sum(mrp, *ratio, pattern, &e)?;
        }
    }
    Ok(to_values(acc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Distance to `v_π` fell to the tolerance.
    Converged(f64),
    /// Distance to `v_π` reached the threshold.
    Diverged(f64),
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub values: ValueFunction,
    pub linf_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub verdict: Verdict,
}

impl IterationTrace {
    /// Ratios of consecutive distances to `v_π`.
    pub fn growth_ratios(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .map(|w| w[1].linf_dist / w[0].linf_dist)
            .collect()
    }

    /// CSV with header `iter,linf_dist,v1,…,vn`.
    pub fn to_csv(&self) -> String {
        let n = self.records.first().map_or(0, |r| r.values.len());
        let mut out = String::from("iter,linf_dist");
        for i in 1..=n {
            let _ = write!(out, ",v{i}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{}", r.iter, r.linf_dist);
            for x in r.values.iter() {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateConfig {
    /// Step size in `(0, 1]`.
    pub step: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
    pub div_threshold: f64,
}

impl Default for IterateConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            max_iters: 10_000,
            conv_tol: 1e-10,
            div_threshold: 1e6,
        }
    }
}

/// Synchronous expected updates `v ← v + step (H v - v)` from `v0` until
/// the distance to `v_π` crosses `conv_tol` or `div_threshold`, or
/// `max_iters` updates have been made.
pub fn iterate(mrp: &Mrp, h: &TdWeights, v0: &ValueFunction, cfg: &IterateConfig) -> Result<IterationTrace> {
    if !(cfg.step > 0.0 && cfg.step <= 1.0) {
        return Err(Error::InvalidParameter(format!("step {} outside (0, 1]", cfg.step)));
    }
    let v_pi = mrp.exact_values()?;
    let mut v = mrp.masked(v0)?;
    let mut records = Vec::new();
    for iter in 0..=cfg.max_iters {
        if iter > 0 {
            let hv = apply_vec(mrp, h, &v)?;
            v += (hv - &v) * cfg.step;
        }
        let values = to_values(v.clone());
        let linf_dist = values.linf_distance(&v_pi);
        records.push(IterationRecord {
            iter,
            values,
            linf_dist,
        });
        let verdict = if linf_dist <= cfg.conv_tol {
            Some(Verdict::Converged(cfg.conv_tol))
        } else if linf_dist >= cfg.div_threshold || !linf_dist.is_finite() {
            Some(Verdict::Diverged(cfg.div_threshold))
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(IterationTrace { records, verdict });
        }
    }
    Ok(IterationTrace {
        records,
        verdict: Verdict::Exhausted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            min: -2.0,
            max: 2.0,
            points: 21,
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || !self.min.is_finite() || !self.max.is_finite() || self.min >= self.max {
            return Err(Error::InvalidParameter(format!(
                "grid needs min < max and at least 2 points, got [{}, {}] x {}",
                self.min, self.max, self.points
            )));
        }
        Ok(())
    }

    pub fn coords(&self) -> Vec<f64> {
        let span = self.max - self.min;
        let last = (self.points - 1) as f64;
        (0..self.points).map(|i| self.min + span * i as f64 / last).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub v1: f64,
    pub v2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Unit expected-update directions `(H v - v) / ‖H v - v‖₂` over a square
/// grid of two-state value functions. Rows run over `v1` in the outer loop
/// and `v2` in the inner loop.
pub fn update_field(mrp: &Mrp, h: &TdWeights, grid: &Grid) -> Result<Vec<FieldRow>> {
    grid.validate()?;
    let states = mrp.non_terminal_states();
    if states.len() != 2 {
        return Err(Error::WrongStateCount(states.len()));
    }
    let coords = grid.coords();
    let mut rows = Vec::with_capacity(coords.len() * coords.len());
    for &v1 in &coords {
        for &v2 in &coords {
            let mut v = DVector::zeros(mrp.n_states());
            v[states[0]] = v1;
            v[states[1]] = v2;
            let d = apply_vec(mrp, h, &v)? - &v;
            let (d1, d2) = (d[states[0]], d[states[1]]);
            let norm = d1.hypot(d2);
            let (d1, d2) = if norm < 1e-12 {
                (0.0, 0.0)
            } else {
                (d1 / norm, d2 / norm)
            };
            rows.push(FieldRow { v1, v2, d1, d2 });
        }
    }
    Ok(rows)
}

pub fn field_csv(rows: &[FieldRow]) -> String {
    let mut out = String::from("v1,v2,d1,d2\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.v1, r.v2, r.d1, r.d2);
    }
    out
}

/// Largest `‖H v - H v'‖∞ / ‖v - v'‖∞` over `pairs` random pairs drawn
/// uniformly from `[-1, 1]` on the non-terminal states. Pair `k` uses
/// stream `k` of `seed`.
pub fn empirical_modulus(mrp: &Mrp, h: &TdWeights, pairs: usize, seed: u64) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::InvalidParameter("pairs must be positive".into()));
    }
    let n = mrp.n_states();
    let mut best: f64 = 0.0;
    for k in 0..pairs {
        let mut rng = rng::stream(seed, k as u64);
        let mut draw = || {
            DVector::from_fn(n, |s, _| {
                if mrp.is_terminal(s) {
                    0.0
                } else {
                    rng.random_range(-1.0..=1.0)
                }
            })
        };
        let v = draw();
        let w = draw();
        let gap = (&v - &w).amax();
        if gap == 0.0 {
            continue;
        }
        let out_gap = (apply_vec(mrp, h, &v)? - apply_vec(mrp, h, &w)?).amax();
        best = best.max(out_gap / gap);
    }
    Ok(best)
}
