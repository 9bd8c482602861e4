//! Finite Markov reward processes.
//!
//! An [`Mrp`] stores the policy-folded transition matrix together with two
//! views of the reward: the expected reward on leaving each state (consumed
//! by the Bellman operators) and, optionally, a per-transition reward matrix
//! (consumed by the trajectory sampler). Terminal states are absorbing with
//! zero reward and zero value, so every infinite-horizon formula applies to
//! episodic tasks unchanged.

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default episode length cap for sampled trajectories.
pub const DEFAULT_MAX_HORIZON: usize = 100_000;

/// A tabular value function, one entry per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Max-norm distance to `other`.
    pub fn linf_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn linf_norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Euclidean distance to `other` over the listed states.
    pub fn l2_distance_over(&self, other: &ValueFunction, states: &[usize]) -> f64 {
        states
            .iter()
            .map(|&s| (self.0[s] - other.0[s]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for ValueFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ValueFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One sampled episode. `states` always holds one more entry than `rewards`:
/// `rewards[t]` is received on the step from `states[t]` to `states[t + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<usize>,
    rewards: Vec<f64>,
    terminated: bool,
}

impl Trajectory {
    pub fn new(states: Vec<usize>, rewards: Vec<f64>, terminated: bool) -> Result<Self> {
        if states.len() != rewards.len() + 1 {
            return Err(Error::SizeMismatch {
                expected: rewards.len() + 1,
                got: states.len(),
            });
        }
        Ok(Self {
            states,
            rewards,
            terminated,
        })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// True when the final state is terminal.
    pub fn terminated(&self) -> bool {
        self.terminated
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Realized discounted return from time 0.
    pub fn discounted_return(&self, discount: f64) -> f64 {
        self.rewards.iter().rev().fold(0.0, |g, r| r + discount * g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mrp {
    transition: DMatrix<f64>,
    reward: DVector<f64>,
    step_reward: Option<DMatrix<f64>>,
    discount: f64,
    terminal: Vec<bool>,
}

impl Mrp {
    /// Builds an MRP whose reward depends only on the state being left.
    pub fn new(transition: Vec<Vec<f64>>, reward: Vec<f64>, discount: f64, terminal: Vec<bool>) -> Result<Self> {
        let n = transition.len();
        let transition = square_matrix(transition)?;
        check_len(n, reward.len())?;
        check_len(n, terminal.len())?;
        let mrp = Self {
            transition,
            reward: DVector::from_vec(reward),
            step_reward: None,
            discount,
            terminal,
        };
        mrp.validate()?;
        Ok(mrp)
    }

    /// Builds an MRP from per-transition rewards `r(s, s')`. The expected
    /// state reward `Σ_s' P(s, s') r(s, s')` is derived for the operators.
    pub fn with_transition_rewards(
        transition: Vec<Vec<f64>>,
        step_reward: Vec<Vec<f64>>,
        discount: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let n = transition.len();
        let transition = square_matrix(transition)?;
        check_len(n, step_reward.len())?;
        let step_reward = square_matrix(step_reward)?;
        check_len(n, terminal.len())?;
        let reward = DVector::from_fn(n, |s, _| (0..n).map(|t| transition[(s, t)] * step_reward[(s, t)]).sum());
        let mrp = Self {
            transition,
            reward,
            step_reward: Some(step_reward),
            discount,
            terminal,
        };
        mrp.validate()?;
        Ok(mrp)
    }

    /// Linear chain of `n` states between two absorbing ends. Each interior
    /// step moves left or right with probability 1/2; leaving through the
    /// left end pays -1 and through the right end +1. State 0 is the left
    /// terminal, states `1..=n` are the chain, `n + 1` is the right terminal.
    pub fn random_walk(n: usize, discount: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("random walk needs at least one state".into()));
        }
        let size = n + 2;
        let mut p = vec![vec![0.0; size]; size];
        let mut r = vec![vec![0.0; size]; size];
        p[0][0] = 1.0;
        p[n + 1][n + 1] = 1.0;
        for s in 1..=n {
            p[s][s - 1] = 0.5;
            p[s][s + 1] = 0.5;
        }
        r[1][0] = -1.0;
        r[n][n + 1] = 1.0;
        let mut terminal = vec![false; size];
        terminal[0] = true;
        terminal[n + 1] = true;
        Self::with_transition_rewards(p, r, discount, terminal)
    }

    /// Start state used by the random-walk experiments.
    pub fn random_walk_center(n: usize) -> usize {
        n.div_ceil(2)
    }

    /// Two states that stay put with probability `p` and swap otherwise;
    /// all rewards are zero.
    pub fn two_state(p: f64, discount: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability(p));
        }
        Self::new(
            vec![vec![p, 1.0 - p], vec![1.0 - p, p]],
            vec![0.0, 0.0],
            discount,
            vec![false, false],
        )
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::BadDiscount(self.discount));
        }
        for row in 0..n {
            let mut sum = 0.0;
            for col in 0..n {
                let value = self.transition[(row, col)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidTransition { row, col, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow { row, sum });
            }
        }
        for s in 0..n {
            if self.terminal[s] {
                let step_reward_zero = self.step_reward.as_ref().is_none_or(|r| r[(s, s)] == 0.0);
                if self.transition[(s, s)] != 1.0 || self.reward[s] != 0.0 || !step_reward_zero {
                    return Err(Error::NonAbsorbingTerminal(s));
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.terminal.len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Expected reward on leaving each state.
    pub fn reward(&self) -> &DVector<f64> {
        &self.reward
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    pub fn non_terminal_states(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|&s| !self.terminal[s]).collect()
    }

    /// Reward emitted on the transition `from -> to` when sampling.
    pub fn step_reward(&self, from: usize, to: usize) -> f64 {
        match &self.step_reward {
            Some(r) => r[(from, to)],
            None => self.reward[from],
        }
    }

    /// Copies `v` into a vector with terminal entries forced to zero.
    pub(crate) fn masked(&self, v: &[f64]) -> Result<DVector<f64>> {
        check_len(self.n_states(), v.len())?;
        Ok(DVector::from_fn(
            v.len(),
            |s, _| {
                if self.terminal[s] {
                    0.0
                } else {
                    v[s]
                }
            },
        ))
    }

    /// `γ P x`.
    pub(crate) fn discounted_step(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.transition * x) * self.discount
    }

    /// `T v = r + γ P v` on a masked vector.
    pub(crate) fn bellman_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.reward + self.discounted_step(v);
        for (s, &t) in self.terminal.iter().enumerate() {
            if t {
                out[s] = 0.0;
            }
        }
        out
    }

    /// Solves `(I - γP) v = r` over the non-terminal states.
    pub fn exact_values(&self) -> Result<ValueFunction> {
        let idx = self.non_terminal_states();
        let k = idx.len();
        if k == 0 {
            return Ok(ValueFunction(vec![0.0; self.n_states()]));
        }
        let a = DMatrix::from_fn(k, k, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - self.discount * self.transition[(idx[i], idx[j])]
        });
        let b = DVector::from_fn(k, |i, _| self.reward[idx[i]]);
        let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
        let mut values = vec![0.0; self.n_states()];
        for (i, &s) in idx.iter().enumerate() {
            values[s] = x[i];
        }
        Ok(ValueFunction(values))
    }

    /// One application of the Bellman operator.
    pub fn bellman_apply(&self, v: &ValueFunction) -> Result<ValueFunction> {
        let v = self.masked(v)?;
        Ok(to_values(self.bellman_vec(&v)))
    }

    /// `n`-fold composition of the Bellman operator.
    pub fn n_step_apply(&self, v: &ValueFunction, n: usize) -> Result<ValueFunction> {
        if n == 0 {
            return Err(Error::InvalidParameter("n-step operator needs n >= 1".into()));
        }
        let mut x = self.masked(v)?;
        for _ in 0..n {
            x = self.bellman_vec(&x);
        }
        Ok(to_values(x))
    }

    /// Samples an episode from `start` with a generator seeded by `seed`.
    pub fn sample_trajectory(&self, start: usize, seed: u64, max_horizon: usize) -> Result<Trajectory> {
        let mut rng = rng::stream(seed, 0);
        self.sample_trajectory_with(start, &mut rng, max_horizon)
    }

    /// Samples an episode, stopping on entry to a terminal state or after
    /// `max_horizon` steps.
    pub fn sample_trajectory_with(&self, start: usize, rng: &mut Rng, max_horizon: usize) -> Result<Trajectory> {
        if start >= self.n_states() {
            return Err(Error::StateOutOfRange(start));
        }
        if self.terminal[start] {
            return Err(Error::StartTerminal(start));
        }
        if max_horizon == 0 {
            return Err(Error::InvalidParameter("max_horizon must be positive".into()));
        }
        let mut states = vec![start];
        let mut rewards = Vec::new();
        let mut s = start;
        let mut terminated = false;
        for _ in 0..max_horizon {
            let next = self.next_state(s, rng.random::<f64>());
            rewards.push(self.step_reward(s, next));
            states.push(next);
            s = next;
            if self.terminal[s] {
                terminated = true;
                break;
            }
        }
        Ok(Trajectory {
            states,
            rewards,
            terminated,
        })
    }

    fn next_state(&self, s: usize, u: f64) -> usize {
        let n = self.n_states();
        let mut acc = 0.0;
        let mut last = s;
        for t in 0..n {
            let p = self.transition[(s, t)];
            if p > 0.0 {
                acc += p;
                last = t;
                if u < acc {
                    return t;
                }
            }
        }
        last
    }

    /// True when every step of `traj` has positive probability.
    pub fn supports(&self, traj: &Trajectory) -> bool {
        traj.states().windows(2).all(|w| self.transition[(w[0], w[1])] > 0.0)
    }

    /// Parses the plain-text format: `n gamma`, then `n` transition rows,
    /// one reward row and one row of 0/1 terminal flags. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next_line = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what} line")));
        let header: Vec<&str> = next_line("header")?.split_whitespace().collect();
        if header.len() != 2 {
            return Err(Error::Parse("header must be `n_states gamma`".into()));
        }
        let n: usize = parse_num(header[0])?;
        let discount: f64 = parse_num(header[1])?;
        let mut transition = Vec::with_capacity(n);
        for _ in 0..n {
            transition.push(parse_row(next_line("transition")?, n)?);
        }
        let reward = parse_row(next_line("reward")?, n)?;
        let terminal = next_line("terminal")?
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse(format!("terminal flag `{other}` is not 0/1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if terminal.len() != n {
            return Err(Error::Parse(format!(
                "expected {n} terminal flags, got {}",
                terminal.len()
            )));
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after terminal flags".into()));
        }
        Self::new(transition, reward, discount, terminal)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the plain-text format using expected state rewards.
    pub fn to_text(&self) -> String {
        let n = self.n_states();
        let mut out = format!("{} {}\n", n, self.discount);
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
        for s in 0..n {
            let row = join(&mut (0..n).map(|t| self.transition[(s, t)].to_string()));
            let _ = writeln!(out, "{row}");
        }
        let _ = writeln!(out, "{}", join(&mut self.reward.iter().map(|r| r.to_string())));
        let _ = writeln!(
            out,
            "{}",
            join(&mut self.terminal.iter().map(|&t| if t { "1" } else { "0" }.to_string()))
        );
        out
    }
}

pub(crate) fn to_values(v: DVector<f64>) -> ValueFunction {
    ValueFunction(v.as_slice().to_vec())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

fn square_matrix(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidParameter("MRP needs at least one state".into()));
    }
    for row in &rows {
        check_len(n, row.len())?;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("`{s}` is not a valid number")))
}

fn parse_row(line: &str, n: usize) -> Result<Vec<f64>> {
    let row = line.split_whitespace().map(parse_num).collect::<Result<Vec<f64>>>()?;
    if row.len() != n {
        return Err(Error::Parse(format!("expected {n} values, got {}", row.len())));
    }
    Ok(row)
}
