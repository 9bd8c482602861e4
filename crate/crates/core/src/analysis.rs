//! Monte-Carlo checks of the worst-case variance bound for convex returns.
//!
//! Sample `k` of every estimator below is drawn from stream `k` of the
//! caller's seed, so the TD-error covariance and the return variance of one
//! call pair see the same trajectories. Samples are processed in parallel
//! in fixed-size chunks whose partial results are combined in chunk order,
//! so estimates do not depend on the thread count.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::{classify, variance_bound, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::mrp::{Mrp, Trajectory, ValueFunction, DEFAULT_MAX_HORIZON};
use crate::rng;
use crate::spec::ReturnSpec;
use crate::td::td_errors;

/// Relative slack allowed on bound checks.
pub const BOUND_SLACK: f64 = 0.05;

/// Default window over which `κ` is estimated.
pub const DEFAULT_KAPPA_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConfig {
    pub samples: usize,
    /// Number of leading TD errors entering the covariance estimate.
    pub horizon: usize,
    pub seed: u64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            horizon: DEFAULT_KAPPA_HORIZON,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub spec: String,
    pub state: usize,
    pub empirical_variance: f64,
    pub bound: f64,
    pub kappa: f64,
    pub modulus: f64,
    pub samples: usize,
    pub satisfied: bool,
}

/// CSV with header `spec,state,var,bound,kappa,samples,satisfied`.
pub fn reports_csv(reports: &[VarianceReport]) -> String {
    let mut out = String::from("spec,state,var,bound,kappa,samples,satisfied\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.spec, r.state, r.empirical_variance, r.bound, r.kappa, r.samples, r.satisfied
        );
    }
    out
}

/// Episode cap beyond which discounting leaves less than `1e-16` weight.
fn discounted_horizon(discount: f64) -> usize {
    if discount <= 0.0 {
        return 1;
    }
    let steps = (1e-16f64.ln() / discount.ln()).ceil();
    if steps.is_finite() && steps < DEFAULT_MAX_HORIZON as f64 {
        (steps as usize).max(1)
    } else {
        DEFAULT_MAX_HORIZON
    }
}

fn sample(mrp: &Mrp, state: usize, seed: u64, k: usize, horizon: usize) -> Result<Trajectory> {
    mrp.sample_trajectory_with(state, &mut rng::stream(seed, k as u64), horizon)
}

const CHUNK: usize = 1024;

fn chunked<T: Send>(samples: usize, f: impl Fn(Range<usize>) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(samples)))
        .collect()
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    Ok(())
}

/// Sample covariance matrix of `(δ_0, …, δ_{horizon-1})` over trajectories
/// from `state`, with errors past termination equal to zero.
pub fn td_error_covariance(
    mrp: &Mrp,
    v: &ValueFunction,
    state: usize,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    check_samples(samples)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let parts = chunked(samples, |range| {
        let mut sums = vec![0.0; horizon];
        let mut cross = DMatrix::<f64>::zeros(horizon, horizon);
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for k in range {
            let traj = sample(mrp, state, seed, k, horizon)?;
            let deltas = td_errors(&traj, v, mrp.discount())?;
            nz.clear();
            nz.extend(deltas.iter().copied().enumerate().filter(|&(_, d)| d != 0.0));
            for &(i, di) in &nz {
                sums[i] += di;
                for &(j, dj) in &nz {
                    if j >= i {
                        cross[(i, j)] += di * dj;
                    }
                }
            }
        }
        Ok((sums, cross))
    })?;
    let mut sums = vec![0.0; horizon];
    let mut cross = DMatrix::<f64>::zeros(horizon, horizon);
    for (s, c) in &parts {
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        cross += c;
    }
    let n = samples as f64;
    Ok(DMatrix::from_fn(horizon, horizon, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        (cross[(a, b)] - sums[a] * sums[b] / n) / (n - 1.0)
    }))
}

/// `κ = max_{i,j} Cov[δ_i, δ_j | S_0 = state]` over the first `horizon`
/// TD errors.
pub fn estimate_kappa(
    mrp: &Mrp,
    v: &ValueFunction,
    state: usize,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(td_error_covariance(mrp, v, state, horizon, samples, seed)?.max())
}

/// Unbiased sample variance of the estimator's target from `state`.
pub fn estimate_return_variance(
    mrp: &Mrp,
    spec: &ReturnSpec,
    v: &ValueFunction,
    state: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_samples(samples)?;
    let h = spec.impulse();
    let horizon = discounted_horizon(mrp.discount());
    let g = mrp.discount();
    let parts = chunked(samples, |range| {
        range
            .map(|k| {
                let traj = sample(mrp, state, seed, k, horizon)?;
                let deltas = td_errors(&traj, v, g)?;
                let mut disc = 1.0;
                let mut acc = 0.0;
                for (i, d) in deltas.iter().enumerate() {
                    acc += h.get(i) * disc * d;
                    disc *= g;
                }
                Ok(v[state] + acc)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let targets: Vec<f64> = parts.concat();
    let n = samples as f64;
    let mean = targets.iter().sum::<f64>() / n;
    Ok(targets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Estimates both sides of the variance bound for a convex estimator.
pub fn check_bound(
    mrp: &Mrp,
    spec: &ReturnSpec,
    v: &ValueFunction,
    state: usize,
    cfg: &VarianceConfig,
) -> Result<VarianceReport> {
    let class = classify(&spec.impulse(), mrp.discount(), DEFAULT_EPSILON)
        .map_err(|_| Error::NonConvexSpec(spec.to_string()))?;
    if !class.is_convex {
        return Err(Error::NonConvexSpec(spec.to_string()));
    }
    let kappa = estimate_kappa(mrp, v, state, cfg.horizon, cfg.samples, cfg.seed)?;
    let empirical_variance = estimate_return_variance(mrp, spec, v, state, cfg.samples, cfg.seed)?;
    let bound = variance_bound(class.modulus, mrp.discount(), kappa);
    Ok(VarianceReport {
        spec: spec.to_string(),
        state,
        empirical_variance,
        bound,
        kappa,
        modulus: class.modulus,
        samples: cfg.samples,
        satisfied: empirical_variance <= bound * (1.0 + BOUND_SLACK),
    })
}
