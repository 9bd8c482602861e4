//! Step-size sweeps of offline TD learning with confidence intervals.
//!
//! Trial `k` draws all of its episodes from stream `k` of the sweep seed.
//! Episode sampling does not depend on the value function, so every
//! (estimator, step size) pair sees the same episodes within a trial, and
//! the result is identical for any thread count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mrp::{Mrp, Trajectory, ValueFunction, DEFAULT_MAX_HORIZON};
use crate::rng;
use crate::spec::ReturnSpec;
use crate::td::{offline_episode_backup, sequential_episode_backup};
use crate::weights::TdWeights;

/// z-value for a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

/// Sparse λ-returns sharing one contraction modulus at γ = 0.99.
pub fn sparse_preset() -> Vec<ReturnSpec> {
    vec![
        ReturnSpec::SparseLambda { lambda: 0.9, period: 1 },
        ReturnSpec::SparseLambda {
            lambda: 0.75,
            period: 3,
        },
        ReturnSpec::SparseLambda {
            lambda: 0.65,
            period: 5,
        },
    ]
}

/// Truncated λ-returns sharing (approximately) one contraction modulus at
/// γ = 0.99.
pub fn truncated_preset() -> Vec<ReturnSpec> {
    vec![
        ReturnSpec::TruncatedLambda {
            lambda: 0.99,
            len: Some(10),
        },
        ReturnSpec::TruncatedLambda {
            lambda: 0.93,
            len: Some(20),
        },
        ReturnSpec::TruncatedLambda { lambda: 0.9, len: None },
    ]
}

/// 0.05, 0.10, …, 1.00.
pub fn default_alphas() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// How the per-step backups of one episode are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backup {
    /// Increments from every visit are summed and added at once.
    Accumulate,
    /// Visits are applied in time order, each moving the current entry
    /// toward its target.
    #[default]
    Sequential,
}

impl Backup {
    fn apply(
        self,
        traj: &Trajectory,
        v: &ValueFunction,
        h: &TdWeights,
        discount: f64,
        alpha: f64,
    ) -> Result<ValueFunction> {
        match self {
            Backup::Accumulate => offline_episode_backup(traj, v, h, discount, alpha),
            Backup::Sequential => sequential_episode_backup(traj, v, h, discount, alpha),
        }
    }
}

/// One estimator trained at one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRun {
    pub spec: ReturnSpec,
    pub alpha: f64,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub backup: Backup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub specs: Vec<ReturnSpec>,
    pub alphas: Vec<f64>,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    /// Start state of every episode.
    pub start: usize,
    pub max_horizon: usize,
    /// Keep every per-episode error in the result.
    pub record_episodes: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub backup: Backup,
}

impl SweepConfig {
    pub fn new(specs: Vec<ReturnSpec>, alphas: Vec<f64>, start: usize) -> Self {
        Self {
            specs,
            alphas,
            episodes: 10,
            trials: 400,
            seed: 0,
            start,
            max_horizon: DEFAULT_MAX_HORIZON,
            record_episodes: false,
            threads: None,
            backup: Backup::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidParameter(
                "sweep needs at least one spec and one step size".into(),
            ));
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::InvalidParameter(format!("step size {a} outside (0, 1]")));
        }
        if self.episodes == 0 || self.trials == 0 || self.max_horizon == 0 {
            return Err(Error::InvalidParameter(
                "episodes, trials and max_horizon must be positive".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub spec: String,
    pub alpha: f64,
    pub mean_error: f64,
    pub ci95_half: f64,
    pub n_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestAlpha {
    pub spec: String,
    pub alpha: f64,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub spec: String,
    pub alpha: f64,
    pub trial: usize,
    pub episode: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by spec (in configuration order), then by ascending step size.
    pub rows: Vec<SweepRow>,
    pub best: Vec<BestAlpha>,
    pub episodes: Vec<EpisodeRow>,
}

impl SweepResult {
    pub fn row(&self, spec: &str, alpha: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.spec == spec && r.alpha == alpha)
    }

    /// CSV with header `spec,alpha,mean_error,ci95_half,n_trials,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("spec,alpha,mean_error,ci95_half,n_trials,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.spec, r.alpha, r.mean_error, r.ci95_half, r.n_trials, r.seed
            );
        }
        out
    }

    /// Long-format CSV with header `spec,alpha,trial,episode,error`.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("spec,alpha,trial,episode,error\n");
        for r in &self.episodes {
            let _ = writeln!(out, "{},{},{},{},{}", r.spec, r.alpha, r.trial, r.episode, r.error);
        }
        out
    }
}

/// Mean and 95% half-width (normal approximation, `n - 1` denominator).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Episodes of trial `trial`.
pub fn trial_episodes(
    mrp: &Mrp,
    seed: u64,
    trial: usize,
    episodes: usize,
    start: usize,
    max_horizon: usize,
) -> Result<Vec<Trajectory>> {
    let mut rng = rng::stream(seed, trial as u64);
    (0..episodes)
        .map(|_| mrp.sample_trajectory_with(start, &mut rng, max_horizon))
        .collect()
}

/// Trains from the zero value function over `episodes` with offline
/// backups and returns `‖v - v_π‖₂` (non-terminal states) after each one.
pub fn learning_curve(
    mrp: &Mrp,
    episodes: &[Trajectory],
    h: &TdWeights,
    alpha: f64,
    backup: Backup,
    v_pi: &ValueFunction,
) -> Result<Vec<f64>> {
    let states = mrp.non_terminal_states();
    let mut v = ValueFunction::zeros(mrp.n_states());
    episodes
        .iter()
        .map(|ep| {
            v = backup.apply(ep, &v, h, mrp.discount(), alpha)?;
            Ok(v.l2_distance_over(v_pi, &states))
        })
        .collect()
}

/// Per-trial scores (mean error over the episodes) of a single run.
pub fn run_estimator(mrp: &Mrp, run: &EstimatorRun, start: usize, max_horizon: usize) -> Result<Vec<f64>> {
    let mut cfg = SweepConfig::new(vec![run.spec.clone()], vec![run.alpha], start);
    cfg.episodes = run.episodes;
    cfg.trials = run.trials;
    cfg.seed = run.seed;
    cfg.backup = run.backup;
    cfg.max_horizon = max_horizon;
    cfg.validate()?;
    let per_trial = sweep_trials(mrp, &cfg)?;
    Ok(per_trial.iter().map(|t| mean(&t[0][0])).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `[trial][spec][alpha][episode]` errors.
type TrialErrors = Vec<Vec<Vec<Vec<f64>>>>;

fn sweep_trials(mrp: &Mrp, cfg: &SweepConfig) -> Result<TrialErrors> {
    let v_pi = mrp.exact_values()?;
    let impulses: Vec<TdWeights> = cfg.specs.iter().map(ReturnSpec::impulse).collect();
    let work = || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let eps = trial_episodes(mrp, cfg.seed, trial, cfg.episodes, cfg.start, cfg.max_horizon)?;
                impulses
                    .iter()
                    .map(|h| {
                        cfg.alphas
                            .iter()
                            .map(|&a| learning_curve(mrp, &eps, h, a, cfg.backup, &v_pi))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Runs every (spec, step size) pair over `trials` independent trials.
pub fn run_sweep(mrp: &Mrp, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..cfg.alphas.len()).collect();
    order.sort_by(|&a, &b| cfg.alphas[a].total_cmp(&cfg.alphas[b]));
    let per_trial = sweep_trials(mrp, cfg)?;

    let mut rows = Vec::new();
    let mut best = Vec::new();
    let mut episodes = Vec::new();
    for (si, spec) in cfg.specs.iter().enumerate() {
        let label = spec.to_string();
        let mut spec_best: Option<BestAlpha> = None;
        for &ai in &order {
            let alpha = cfg.alphas[ai];
            let scores: Vec<f64> = per_trial.iter().map(|t| mean(&t[si][ai])).collect();
            let (mean_error, ci95_half) = mean_ci95(&scores);
            if spec_best.as_ref().is_none_or(|b| mean_error < b.mean_error) {
                spec_best = Some(BestAlpha {
                    spec: label.clone(),
                    alpha,
                    mean_error,
                });
            }
            rows.push(SweepRow {
                spec: label.clone(),
                alpha,
                mean_error,
                ci95_half,
                n_trials: cfg.trials,
                seed: cfg.seed,
            });
            if cfg.record_episodes {
                for (trial, t) in per_trial.iter().enumerate() {
                    for (episode, &error) in t[si][ai].iter().enumerate() {
                        episodes.push(EpisodeRow {
                            spec: label.clone(),
                            alpha,
                            trial,
                            episode,
                            error,
                        });
                    }
                }
            }
        }
        best.extend(spec_best);
    }
    Ok(SweepResult { rows, best, episodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_of_constant_is_zero_width() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_ci95(&[3.0]), (3.0, 0.0));
        let (m, h) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn default_alpha_grid() {
        let a = default_alphas();
        assert_eq!(a.len(), 20);
        assert_eq!(a[0], 0.05);
        assert_eq!(a[2], 0.15);
        assert_eq!(a[19], 1.0);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SweepConfig::new(vec![], vec![0.1], 1);
        assert!(cfg.validate().is_err());
        cfg.specs = vec![ReturnSpec::Lambda(0.5)];
        cfg.alphas = vec![0.0];
        assert!(cfg.validate().is_err());
        cfg.alphas = vec![0.5];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_sweep_layout() {
        let m = Mrp::random_walk(5, 0.9).unwrap();
        let mut cfg = SweepConfig::new(vec![ReturnSpec::Lambda(0.5), ReturnSpec::NStep(2)], vec![0.3, 0.1], 3);
        cfg.trials = 8;
        cfg.episodes = 3;
        cfg.record_episodes = true;
        let r = run_sweep(&m, &cfg).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows[0].alpha, 0.1);
        assert_eq!(r.rows[1].alpha, 0.3);
        assert_eq!(r.rows[2].spec, "nstep:2");
        assert_eq!(r.best.len(), 2);
        assert_eq!(r.episodes.len(), 4 * 8 * 3);
        assert!(r.rows.iter().all(|row| row.ci95_half >= 0.0));
        assert!(r
            .to_csv()
            .starts_with("spec,alpha,mean_error,ci95_half,n_trials,seed\nlambda:0.5,0.1,"));
    }
}
